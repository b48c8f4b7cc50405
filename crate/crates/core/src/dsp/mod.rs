//! Filter design, zero-phase filtering, analytic-signal decomposition and
//! phase statistics.

mod analytic;
pub(crate) mod fft;
mod filter;
mod plv;

pub use analytic::{
    analytic_signal, instantaneous_amplitude, instantaneous_phase, instantaneous_power_db, AnalyticSeries,
    PhaseTrace,
};
pub use filter::{design_butterworth_bandpass, filtfilt, lfilter, DesignMeta, IirFilter};
pub use plv::plv;
