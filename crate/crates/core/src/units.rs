//! Unit conversions. Everything inside the crate is CGS (g, cm, s, dyn/cm²);
//! mmHg only appears in heart parameters and in exported curves.

/// dyn/cm² per mmHg.
pub const DYN_PER_MMHG: f64 = 1333.22;

#[inline]
pub fn mmhg_to_dyn(p_mmhg: f64) -> f64 {
    p_mmhg * DYN_PER_MMHG
}

#[inline]
pub fn dyn_to_mmhg(p_dyn: f64) -> f64 {
    p_dyn / DYN_PER_MMHG
}
