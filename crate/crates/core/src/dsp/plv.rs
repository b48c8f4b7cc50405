use alloc::vec::Vec;

use crate::{Error, Result};

/// Phase-locking value across trials at every time point:
/// `|mean over trials of e^{jφ}|`, in [0, 1].
///
/// `phases` is `[trial][time]`; rows shorter than the first are an error.
pub fn plv<R: AsRef<[f64]>>(phases: &[R]) -> Result<Vec<f64>> {
    let first = phases.first().ok_or(Error::EmptyInput("no trials"))?.as_ref();
    let n = first.len();
    if let Some(r) = phases.iter().find(|r| r.as_ref().len() != n) {
        return Err(Error::LengthMismatch { expected: n, found: r.as_ref().len() });
    }
    let count = phases.len() as f64;
    Ok((0..n)
        .map(|t| {
            let (mut c, mut s) = (0.0, 0.0);
            for row in phases {
                let phi = row.as_ref()[t];
                c += libm::cos(phi);
                s += libm::sin(phi);
            }
            libm::hypot(c / count, s / count).min(1.0)
        })
        .collect())
}
