//! Intent categorization and usage counts.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::Archive;
use crate::label::LabelStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum IntentCategory {
    Timer,
    VolumeControl,
    Weather,
    Music,
    Shopping,
    Calendar,
    Sport,
    Error,
    Other,
}

impl IntentCategory {
    pub const ALL: [IntentCategory; 9] = [
        IntentCategory::Timer,
        IntentCategory::VolumeControl,
        IntentCategory::Weather,
        IntentCategory::Music,
        IntentCategory::Shopping,
        IntentCategory::Calendar,
        IntentCategory::Sport,
        IntentCategory::Error,
        IntentCategory::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntentCategory::Timer => "Timer",
            IntentCategory::VolumeControl => "Volume Control",
            IntentCategory::Weather => "Weather",
            IntentCategory::Music => "Music",
            IntentCategory::Shopping => "Shopping",
            IntentCategory::Calendar => "Calendar",
            IntentCategory::Sport => "Sport",
            IntentCategory::Error => "Error",
            IntentCategory::Other => "Other",
        }
    }
}

impl fmt::Display for IntentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn ci(pattern: &str) -> Regex {
    RegexBuilder::new(pattern)
        .case_insensitive(true)
        .build()
        .expect("intent pattern")
}

// Checked in order, first match wins.
static RULES: LazyLock<Vec<(IntentCategory, Regex)>> = LazyLock::new(|| {
    vec![
        (IntentCategory::Error, ci("^alexa$|^$")),
        (IntentCategory::Timer, ci("timer")),
        (IntentCategory::VolumeControl, ci("volume")),
        (IntentCategory::Weather, ci("weather|rain|temperature")),
        (IntentCategory::Music, ci("play|stop|pause|track|listen|skip")),
        (IntentCategory::Shopping, ci("shopping list")),
        (IntentCategory::Calendar, ci("calendar")),
        (IntentCategory::Sport, ci("football|score")),
    ]
});

pub fn categorize(transcript: Option<&str>) -> IntentCategory {
    let Some(text) = transcript else {
        return IntentCategory::Error;
    };
    RULES
        .iter()
        .find(|(_, re)| re.is_match(text))
        .map(|(c, _)| *c)
        .unwrap_or(IntentCategory::Other)
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown speaker label {label:?}; expected one of {allowed:?}")]
    UnknownSpeaker { label: String, allowed: Vec<String> },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DeviceKey {
    pub serial: String,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub records: usize,
    pub audio_and_text: usize,
    pub audio_no_text: usize,
    pub text_no_audio: usize,
    pub neither: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UsageReport {
    pub speaker: Option<String>,
    pub status: BTreeMap<String, usize>,
    pub devices: BTreeMap<DeviceKey, usize>,
    /// Every category is present, zero counts included.
    pub intents: BTreeMap<IntentCategory, usize>,
    /// Records the intent counts were taken over.
    pub considered: usize,
    pub totals: Totals,
}

fn has_text(t: Option<&str>) -> bool {
    t.is_some_and(|t| !t.trim().is_empty())
}

/// Status and device counts cover the whole archive; intent counts cover the
/// records whose clip carries `speaker` when one is given. `allowed` is the
/// configured label set the filter is checked against.
pub fn usage_report(
    archive: &Archive,
    store: &LabelStore,
    speaker: Option<&str>,
    allowed: &[String],
) -> Result<UsageReport, ReportError> {
    if let Some(s) = speaker {
        if !allowed.iter().any(|a| a == s) {
            return Err(ReportError::UnknownSpeaker {
                label: s.to_string(),
                allowed: allowed.to_vec(),
            });
        }
    }
    let mut status = BTreeMap::new();
    let mut devices = BTreeMap::new();
    let mut intents: BTreeMap<_, _> = IntentCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut totals = Totals::default();
    let mut considered = 0;
    for r in archive.records() {
        *status.entry(r.status.clone()).or_insert(0) += 1;
        *devices
            .entry(DeviceKey {
                serial: r.device_serial.clone(),
                name: r.device_name.clone(),
            })
            .or_insert(0) += 1;
        totals.records += 1;
        match (r.audio_file.is_some(), has_text(r.transcript.as_deref())) {
            (true, true) => totals.audio_and_text += 1,
            (true, false) => totals.audio_no_text += 1,
            (false, true) => totals.text_no_audio += 1,
            (false, false) => totals.neither += 1,
        }
        let included = match speaker {
            None => true,
            Some(s) => store.get(&r.id).is_some_and(|l| l.label == s),
        };
        if included {
            considered += 1;
            *intents.entry(categorize(r.transcript.as_deref())).or_insert(0) += 1;
        }
    }
    Ok(UsageReport {
        speaker: speaker.map(str::to_string),
        status,
        devices,
        intents,
        considered,
        totals,
    })
}

impl UsageReport {
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "Status")?;
        for (s, n) in &self.status {
            writeln!(out, "  {s:<24} {n:>6}")?;
        }
        writeln!(out, "\nDevices")?;
        for (d, n) in &self.devices {
            let label = format!("{} ({})", d.name, d.serial);
            writeln!(out, "  {label:<24} {n:>6}")?;
        }
        match &self.speaker {
            Some(s) => writeln!(out, "\nIntents (speaker {s})")?,
            None => writeln!(out, "\nIntents")?,
        }
        for (c, n) in &self.intents {
            writeln!(out, "  {:<24} {n:>6}", c.name())?;
        }
        let t = &self.totals;
        writeln!(out, "\nTotals")?;
        writeln!(out, "  {:<24} {:>6}", "records", t.records)?;
        writeln!(out, "  {:<24} {:>6}", "audio and text", t.audio_and_text)?;
        writeln!(out, "  {:<24} {:>6}", "audio, no text", t.audio_no_text)?;
        writeln!(out, "  {:<24} {:>6}", "text, no audio", t.text_no_audio)?;
        writeln!(out, "  {:<24} {:>6}", "neither", t.neither)?;
        Ok(())
    }

    pub fn write_status_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["status", "count"])?;
        for (s, n) in &self.status {
            w.write_record([s.as_str(), &n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_device_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["device_serial", "device_name", "count"])?;
        for (d, n) in &self.devices {
            w.write_record([d.serial.as_str(), &d.name, &n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_intent_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "count"])?;
        for (c, n) in &self.intents {
            w.write_record([c.name(), &n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelRecord;

    #[test]
    fn table_examples() {
        assert_eq!(categorize(Some("set timer for five minutes")), IntentCategory::Timer);
        assert_eq!(categorize(Some("play the smiths")), IntentCategory::Music);
        assert_eq!(categorize(Some("alexa")), IntentCategory::Error);
        assert_eq!(
            categorize(Some("how much does a tablespoon of sugar weigh")),
            IntentCategory::Other
        );
    }

    #[test]
    fn error_cases() {
        assert_eq!(categorize(None), IntentCategory::Error);
        assert_eq!(categorize(Some("")), IntentCategory::Error);
        assert_eq!(categorize(Some("ALEXA")), IntentCategory::Error);
        // only the whole string counts
        assert_eq!(categorize(Some("alexa what's the weather")), IntentCategory::Weather);
    }

    #[test]
    fn precedence() {
        // timer before music, weather before music
        assert_eq!(categorize(Some("stop the timer")), IntentCategory::Timer);
        assert_eq!(categorize(Some("will it rain, play a song")), IntentCategory::Weather);
        // "listen" is music, so shopping needs "shopping list" without it
        assert_eq!(categorize(Some("add milk to the shopping list")), IntentCategory::Shopping);
        assert_eq!(categorize(Some("what's the football score")), IntentCategory::Sport);
        assert_eq!(categorize(Some("Turn The VOLUME up")), IntentCategory::VolumeControl);
        assert_eq!(categorize(Some("what's on my calendar")), IntentCategory::Calendar);
    }

    #[test]
    fn empty_archive() {
        let dir = tempfile::tempdir().unwrap();
        let archive = Archive::create(dir.path()).unwrap();
        let r = usage_report(&archive, &LabelStore::in_memory(), None, &[]).unwrap();
        assert!(r.status.is_empty() && r.devices.is_empty());
        assert!(r.intents.values().all(|&n| n == 0));
        assert_eq!(r.totals, Totals::default());
    }

    #[test]
    fn fixture_counts_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let archive = crate::synth::usage_fixture(dir.path()).unwrap();
        let store = LabelStore::open_in(dir.path()).unwrap();
        let labels = crate::label::default_label_set();
        let r = usage_report(&archive, &store, None, &labels).unwrap();
        assert_eq!(r.status["SUCCESS"], 7);
        assert_eq!(r.status["FAULT"], 3);
        let per_device: Vec<usize> = r.devices.values().copied().collect();
        assert_eq!(per_device, vec![6, 4]);
        assert_eq!(r.intents.values().sum::<usize>(), 10);
        assert_eq!(r.totals.audio_and_text + r.totals.audio_no_text, 8);

        let male = usage_report(&archive, &store, Some("Male"), &labels).unwrap();
        assert_eq!(male.status, r.status);
        assert_eq!(male.intents.values().sum::<usize>(), male.considered);
        assert!(male.considered < 10);

        let mut empty = LabelStore::in_memory();
        empty.put(LabelRecord::manual("nope", "Male")).unwrap();
        let none = usage_report(&archive, &empty, Some("Female"), &labels).unwrap();
        assert_eq!(none.considered, 0);
        assert_eq!(none.devices, r.devices);

        assert!(matches!(
            usage_report(&archive, &store, Some("Robot"), &labels),
            Err(ReportError::UnknownSpeaker { .. })
        ));
    }

    #[test]
    fn csv_sections() {
        let dir = tempfile::tempdir().unwrap();
        let archive = crate::synth::usage_fixture(dir.path()).unwrap();
        let r = usage_report(&archive, &LabelStore::in_memory(), None, &[]).unwrap();
        let mut buf = Vec::new();
        r.write_status_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "status,count\nFAULT,3\nSUCCESS,7\n");
    }
}
