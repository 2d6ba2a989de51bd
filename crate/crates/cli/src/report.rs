//! Report documents and their byte-stable JSON encoding.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use vortexlines::dynamics::{IntegratorStats, Trajectory};
use vortexlines::format::g17;
use vortexlines::invariants::{InvariantReport, LiouvilleReport};
use vortexlines::wellposed::{RankSample, Verdict, WellPosednessReport};

/// Pretty JSON whose floats always print with 17 significant digits, so
/// equal inputs give byte-identical documents.
struct StableFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for StableFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialize `value` as stable pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, StableFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FormsSummary {
    pub sigma: String,
    pub s_hat: String,
    pub r_hat: String,
    pub s_cap: String,
    pub r_cap: String,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport<'a> {
    #[serde(flatten)]
    pub report: &'a WellPosednessReport,
    pub min_rank: Option<usize>,
    pub forms: FormsSummary,
}

#[derive(Debug, Serialize)]
pub struct LiouvilleSummary {
    /// Worst value over every task.
    pub max_abs_det_minus_one: f64,
    pub failures: usize,
    pub tasks: Vec<LiouvilleReport>,
}

#[derive(Debug, Serialize)]
pub struct InvariantEntry {
    #[serde(flatten)]
    pub report: InvariantReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct InvariantsDocument<'a> {
    pub verdict: Verdict,
    pub degree_ok: bool,
    pub parity_ok: bool,
    pub rank_samples: &'a [RankSample],
    pub seed: u64,
    pub invariants: Vec<InvariantEntry>,
    pub liouville: Option<LiouvilleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct TrajectoryDocument<'a> {
    pub names: Vec<String>,
    pub times: &'a [f64],
    pub states: &'a [Vec<f64>],
    pub stats: &'a IntegratorStats,
    pub failure: Option<String>,
}

impl<'a> TrajectoryDocument<'a> {
    pub fn new(names: &[String], traj: &'a Trajectory) -> Self {
        Self {
            names: names.to_vec(),
            times: &traj.times,
            states: &traj.states,
            stats: &traj.stats,
            failure: traj.failure.as_ref().map(ToString::to_string),
        }
    }
}
