#pragma once

namespace apnn {

// Derivative slots carried through a network evaluation. Independent input
// variables are t, x, v; second derivatives are limited to the ones the
// residuals need (xx, vv, tx).
enum SlotId : int {
  slot_val = 0,
  slot_dt = 1,
  slot_dx = 2,
  slot_dv = 3,
  slot_dxx = 4,
  slot_dvv = 5,
  slot_dtx = 6,
  n_slot_ids = 7,
};

enum SlotMask : unsigned {
  m_val = 1u << slot_val,
  m_dt = 1u << slot_dt,
  m_dx = 1u << slot_dx,
  m_dv = 1u << slot_dv,
  m_dxx = 1u << slot_dxx,
  m_dvv = 1u << slot_dvv,
  m_dtx = 1u << slot_dtx,
};

// Active-slot bookkeeping for a batched evaluation. Slots are stored in SlotId
// order; pos[] maps a SlotId to its row offset within a sample block (-1 if
// inactive). Second-order slots pull in the first-order slots they chain
// through (xx needs x, vv needs v, tx needs t and x).
struct SlotLayout {
  unsigned mask = m_val;
  int count = 1;
  int pos[n_slot_ids] = {0, -1, -1, -1, -1, -1, -1};

  static SlotLayout make(unsigned wanted) {
    unsigned m = wanted | m_val;
    if (m & m_dxx) m |= m_dx;
    if (m & m_dvv) m |= m_dv;
    if (m & m_dtx) m |= m_dt | m_dx;
    SlotLayout lay;
    lay.mask = m;
    lay.count = 0;
    for (int s = 0; s < n_slot_ids; ++s)
      lay.pos[s] = (m & (1u << s)) ? lay.count++ : -1;
    return lay;
  }

  bool has(SlotId s) const { return pos[s] >= 0; }
  int at(SlotId s) const { return pos[s]; }
};

// One scalar output with its derivatives; inactive slots read 0.
struct Jet {
  double val = 0, dt = 0, dx = 0, dv = 0, dxx = 0, dvv = 0, dtx = 0;

  double& by_id(int s) {
    switch (s) {
      case slot_val: return val;
      case slot_dt: return dt;
      case slot_dx: return dx;
      case slot_dv: return dv;
      case slot_dxx: return dxx;
      case slot_dvv: return dvv;
      default: return dtx;
    }
  }
  double by_id(int s) const { return const_cast<Jet*>(this)->by_id(s); }
};

}
