//! Sessions, events and onset-aligned epochs.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Length of every epoch, ending at movement onset.
pub const EPOCH_SPAN_S: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Cue,
    FootswitchRelease,
    Onset,
    BlockBreak,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Cue => "cue",
            EventKind::FootswitchRelease => "footswitch_release",
            EventKind::Onset => "onset",
            EventKind::BlockBreak => "block_break",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cue" => Ok(EventKind::Cue),
            "footswitch_release" => Ok(EventKind::FootswitchRelease),
            "onset" => Ok(EventKind::Onset),
            "block_break" => Ok(EventKind::BlockBreak),
            other => Err(Error::InvalidRecording(alloc::format!("unknown event kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Seconds from the start of the recording.
    pub time_s: f64,
    pub trial_index: usize,
}

/// A continuous multi-channel recording. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    session_id: String,
    sampling_rate_hz: f64,
    channel_names: Vec<String>,
    samples: Vec<Vec<f64>>,
    emg_channel_indices: Vec<usize>,
    events: Vec<Event>,
}

impl Recording {
    /// Validates and builds a recording. `samples` is `[channel][time]`.
    pub fn new(
        session_id: impl Into<String>,
        sampling_rate_hz: f64,
        channel_names: Vec<String>,
        samples: Vec<Vec<f64>>,
        emg_channel_indices: Vec<usize>,
        events: Vec<Event>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidRecording(msg));
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return invalid(alloc::format!("sampling rate must be positive, got {sampling_rate_hz}"));
        }
        if channel_names.is_empty() {
            return invalid("no channels".to_string());
        }
        if samples.len() != channel_names.len() {
            return invalid(alloc::format!(
                "{} channel names but {} sample rows",
                channel_names.len(),
                samples.len()
            ));
        }
        let n = samples[0].len();
        if n == 0 {
            return invalid("channels hold no samples".to_string());
        }
        if let Some((i, row)) = samples.iter().enumerate().find(|(_, r)| r.len() != n) {
            return invalid(alloc::format!(
                "channel {:?} has {} samples, expected {n}",
                channel_names[i],
                row.len()
            ));
        }
        for (i, name) in channel_names.iter().enumerate() {
            if channel_names[..i].contains(name) {
                return invalid(alloc::format!("duplicate channel name {name:?}"));
            }
        }
        let mut emg = emg_channel_indices;
        emg.sort_unstable();
        emg.dedup();
        if let Some(&bad) = emg.iter().find(|&&i| i >= channel_names.len()) {
            return invalid(alloc::format!("EMG channel index {bad} out of range"));
        }
        let duration = n as f64 / sampling_rate_hz;
        for ev in &events {
            if !(ev.time_s.is_finite() && ev.time_s >= 0.0 && ev.time_s <= duration) {
                return invalid(alloc::format!(
                    "event {} of trial {} at {} s lies outside the {duration} s recording",
                    ev.kind,
                    ev.trial_index,
                    ev.time_s
                ));
            }
        }
        Ok(Self {
            session_id: session_id.into(),
            sampling_rate_hz,
            channel_names,
            samples,
            emg_channel_indices: emg,
            events,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn emg_channel_indices(&self) -> &[usize] {
        &self.emg_channel_indices
    }

    pub fn eeg_channel_indices(&self) -> Vec<usize> {
        (0..self.channel_names.len())
            .filter(|i| !self.emg_channel_indices.contains(i))
            .collect()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    /// Events of one kind ordered by trial index.
    pub fn events_of(&self, kind: EventKind) -> Vec<Event> {
        let mut out: Vec<Event> = self.events.iter().copied().filter(|e| e.kind == kind).collect();
        out.sort_by(|a, b| a.trial_index.cmp(&b.trial_index));
        out
    }

    /// Returns a copy with every channel row replaced by `f(index, row)`.
    pub fn map_channels(&self, mut f: impl FnMut(usize, &[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, row)| f(i, row))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.session_id.clone(),
            self.sampling_rate_hz,
            self.channel_names.clone(),
            samples,
            self.emg_channel_indices.clone(),
            self.events.clone(),
        )
    }
}

/// One trial, `[channel][time]`, covering `[-6, 0)` s around movement onset.
///
/// Sample `j` sits at `-6 + j / fs` seconds; the onset sample itself is the
/// exclusive end of the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    trial_index: usize,
    onset_time_s: f64,
    channel_names: Vec<String>,
    data: Vec<Vec<f64>>,
    sampling_rate_hz: f64,
}

impl Epoch {
    pub fn new(
        trial_index: usize,
        onset_time_s: f64,
        channel_names: Vec<String>,
        data: Vec<Vec<f64>>,
        sampling_rate_hz: f64,
    ) -> Result<Self> {
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(alloc::format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if data.len() != channel_names.len() || data.is_empty() {
            return Err(Error::LengthMismatch { expected: channel_names.len(), found: data.len() });
        }
        let n = epoch_len(sampling_rate_hz);
        if let Some(row) = data.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch { expected: n, found: row.len() });
        }
        Ok(Self { trial_index, onset_time_s, channel_names, data, sampling_rate_hz })
    }

    pub fn trial_index(&self) -> usize {
        self.trial_index
    }

    pub fn onset_time_s(&self) -> f64 {
        self.onset_time_s
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.into()))
    }

    /// Time of sample `j` relative to onset.
    pub fn time_of(&self, j: usize) -> f64 {
        -EPOCH_SPAN_S + j as f64 / self.sampling_rate_hz
    }
}

/// Samples per epoch at `fs`.
pub fn epoch_len(fs: f64) -> usize {
    libm::round(EPOCH_SPAN_S * fs) as usize
}

/// Nearest-sample index of a time in seconds.
pub fn time_to_sample(time_s: f64, fs: f64) -> i64 {
    libm::round(time_s * fs) as i64
}

/// Cuts the `[-6, 0)` s epoch preceding `onset_time_s` from every channel.
pub fn slice_epoch(rec: &Recording, onset_time_s: f64, trial_index: usize) -> Result<Epoch> {
    let fs = rec.sampling_rate_hz();
    let n = epoch_len(fs) as i64;
    let end = time_to_sample(onset_time_s, fs);
    let start = end - n;
    if !onset_time_s.is_finite() || start < 0 || end > rec.n_samples() as i64 {
        return Err(Error::EpochOutOfBounds { trial_index, onset_time_s });
    }
    let (start, end) = (start as usize, end as usize);
    let data = rec.samples().iter().map(|row| row[start..end].to_vec()).collect();
    Epoch::new(trial_index, onset_time_s, rec.channel_names().to_vec(), data, fs)
}

/// A subject's sessions in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSet {
    subject_id: String,
    sessions: Vec<(String, Vec<Epoch>)>,
}

impl SessionSet {
    pub fn new(subject_id: impl Into<String>, sessions: Vec<(String, Vec<Epoch>)>) -> Result<Self> {
        for (i, (id, _)) in sessions.iter().enumerate() {
            if sessions[..i].iter().any(|(other, _)| other == id) {
                return Err(Error::InvalidRecording(alloc::format!("session {id:?} listed twice")));
            }
        }
        let mut channels = sessions.iter().flat_map(|(_, e)| e.iter()).map(|e| e.data().len());
        if let Some(first) = channels.next() {
            if let Some(other) = channels.find(|&c| c != first) {
                return Err(Error::LengthMismatch { expected: first, found: other });
            }
        }
        Ok(Self { subject_id: subject_id.into(), sessions })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn sessions(&self) -> &[(String, Vec<Epoch>)] {
        &self.sessions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("ch{i}")).collect()
    }

    fn ramp_recording(fs: f64, seconds: f64) -> Recording {
        let n = (fs * seconds) as usize;
        let row: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Recording::new("s", fs, names(2), vec![row.clone(), vec![3.5; n]], vec![], vec![]).unwrap()
    }

    #[test]
    fn builds_three_channel_recording() {
        let rec = Recording::new("s1", 256.0, names(3), vec![vec![0.0; 10]; 3], vec![2], vec![]).unwrap();
        assert_eq!(rec.samples().len(), 3);
        assert_eq!(rec.n_samples(), 10);
        assert_eq!(rec.eeg_channel_indices(), vec![0, 1]);
    }

    #[test]
    fn rejects_ragged_rows_and_bad_metadata() {
        let ragged = Recording::new("s", 256.0, names(2), vec![vec![0.0; 10], vec![0.0; 9]], vec![], vec![]);
        assert!(matches!(ragged, Err(Error::InvalidRecording(_))));
        let dup = Recording::new("s", 256.0, vec!["a".into(), "a".into()], vec![vec![0.0]; 2], vec![], vec![]);
        assert!(dup.is_err());
        let emg = Recording::new("s", 256.0, names(2), vec![vec![0.0]; 2], vec![5], vec![]);
        assert!(emg.is_err());
        let ev = Event { kind: EventKind::Cue, time_s: 2.0, trial_index: 0 };
        let late = Recording::new("s", 1.0, names(1), vec![vec![0.0]], vec![], vec![ev]);
        assert!(late.is_err());
        assert!(Recording::new("s", 0.0, names(1), vec![vec![0.0]], vec![], vec![]).is_err());
    }

    #[test]
    fn epoch_at_ten_seconds_covers_expected_samples() {
        let rec = ramp_recording(256.0, 12.0);
        let ep = slice_epoch(&rec, 10.0, 3).unwrap();
        assert_eq!(ep.len(), 1536);
        assert_eq!(ep.data()[0][0], 1024.0);
        assert_eq!(*ep.data()[0].last().unwrap(), 2559.0);
        assert_eq!(ep.trial_index(), 3);
        assert_eq!(ep.time_of(0), -6.0);
    }

    #[test]
    fn early_onset_is_out_of_bounds() {
        let rec = ramp_recording(256.0, 12.0);
        assert_eq!(
            slice_epoch(&rec, 5.0, 7),
            Err(Error::EpochOutOfBounds { trial_index: 7, onset_time_s: 5.0 })
        );
        assert!(slice_epoch(&rec, 12.5, 0).is_err());
        assert!(slice_epoch(&rec, 6.0, 0).is_ok());
    }

    #[test]
    fn constant_channel_stays_constant() {
        let rec = ramp_recording(100.0, 20.0);
        let ep = slice_epoch(&rec, 13.37, 0).unwrap();
        assert!(ep.data()[1].iter().all(|&v| v == 3.5));
    }

    #[test]
    fn onset_uses_nearest_sample() {
        let rec = ramp_recording(100.0, 20.0);
        // 10.004 s rounds to sample 1000, 10.006 s to 1001
        assert_eq!(*slice_epoch(&rec, 10.004, 0).unwrap().data()[0].last().unwrap(), 999.0);
        assert_eq!(*slice_epoch(&rec, 10.006, 0).unwrap().data()[0].last().unwrap(), 1000.0);
    }

    #[test]
    fn session_set_requires_consistent_channels() {
        let e2 = Epoch::new(0, 6.0, names(2), vec![vec![0.0; 60]; 2], 10.0).unwrap();
        let e3 = Epoch::new(1, 6.0, names(3), vec![vec![0.0; 60]; 3], 10.0).unwrap();
        assert!(SessionSet::new("sub", vec![("a".into(), vec![e2.clone()]), ("b".into(), vec![e3])]).is_err());
        assert!(SessionSet::new("sub", vec![("a".into(), vec![e2.clone()]), ("a".into(), vec![e2])]).is_err());
    }

    #[test]
    fn event_kind_round_trips_through_text() {
        for k in [EventKind::Cue, EventKind::FootswitchRelease, EventKind::Onset, EventKind::BlockBreak] {
            assert_eq!(k.as_str().parse::<EventKind>().unwrap(), k);
        }
        assert!("jump".parse::<EventKind>().is_err());
    }
}
