//! Data input, CSV output, atomic writes and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use finmix::model::Family;
use finmix::Dataset;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Floats are written with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory RFC 4180 table.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        writer.write_record(header).expect("write to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("write to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flush to memory")
    }
}

/// Writes via a temporary file in the target directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes `bytes` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Reads a data CSV. The header selects the columns: `y1,y2` for bivariate
/// data, otherwise `y`. Other columns (such as `z`) are ignored. `family`
/// forces Poisson counts for a `y` column; the default is Normal.
pub fn read_dataset(path: &Path, family: Option<Family>) -> Result<Dataset, CliError> {
    let text = read_text(path)?;
    let name = path.display();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{name}: header: {e}")))?
        .clone();
    let col = |h: &str| headers.iter().position(|x| x == h);
    let columns: Vec<(usize, &str)> = match (col("y"), col("y1"), col("y2")) {
        (_, Some(a), Some(b)) => vec![(a, "y1"), (b, "y2")],
        (Some(a), _, _) => vec![(a, "y")],
        _ => return Err(CliError::Parse(format!("{name}: header needs a `y` column or `y1,y2` columns"))),
    };
    let family = match (columns.len(), family) {
        (2, None | Some(Family::BivariateNormal)) => Family::BivariateNormal,
        (1, None | Some(Family::Normal)) => Family::Normal,
        (1, Some(Family::Poisson)) => Family::Poisson,
        (_, Some(f)) => {
            return Err(CliError::BadArgs(format!(
                "{name}: columns {:?} do not fit the {} family",
                columns.iter().map(|c| c.1).collect::<Vec<_>>(),
                f.name()
            )))
        }
        _ => unreachable!("one or two columns"),
    };
    let mut data = match family {
        Family::Normal => Dataset::Real(Vec::new()),
        Family::BivariateNormal => Dataset::Pair(Vec::new()),
        Family::Poisson => Dataset::Count(Vec::new()),
    };
    for (k, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = k + 2;
        let record = record.map_err(|e| CliError::Parse(format!("{name} line {line}: {e}")))?;
        let field = |(idx, label): (usize, &str)| -> Result<&str, CliError> {
            record
                .get(idx)
                .ok_or_else(|| CliError::Parse(format!("{name} line {line}: missing field {label}")))
        };
        let real = |c: (usize, &str)| -> Result<f64, CliError> {
            let s = field(c)?;
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Parse(format!("{name} line {line}, field {}: invalid number `{s}`", c.1))),
            }
        };
        match &mut data {
            Dataset::Real(v) => v.push(real(columns[0])?),
            Dataset::Pair(v) => v.push([real(columns[0])?, real(columns[1])?]),
            Dataset::Count(v) => {
                let s = field(columns[0])?;
                let c = s.parse::<u64>().map_err(|_| {
                    CliError::Parse(format!("{name} line {line}, field y: `{s}` is not a non-negative integer count"))
                })?;
                v.push(c);
            }
        }
    }
    Ok(data)
}

/// Sidecar path `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct WallClock {
    started_unix_seconds: f64,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    rng: &'a str,
    seed: Option<u64>,
    config: &'a Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    metrics: &'a Value,
    wall_clock: WallClock,
}

/// Collects what a run needs to record about itself.
pub struct Run {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub metrics: Value,
    started: SystemTime,
}

impl Run {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C) -> Self {
        Self {
            command,
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            metrics: Value::Object(Default::default()),
            started: SystemTime::now(),
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics[key] = serde_json::to_value(value).expect("metric serializes");
    }

    /// Writes `<primary>.manifest.json` next to the primary output.
    pub fn finish(self, primary: &Path) -> Result<(), CliError> {
        let started = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let elapsed = self.started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            rng: finmix::rng::RNG_NAME,
            seed: self.seed,
            config: &self.config,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            metrics: &self.metrics,
            wall_clock: WallClock {
                started_unix_seconds: started,
                elapsed_seconds: elapsed,
            },
        };
        let mut bytes = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(&manifest_path(primary), &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn reads_each_column_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "y,z\n1.5,1\n-2,2\n").unwrap();
        assert_eq!(read_dataset(&p, None).unwrap(), Dataset::Real(vec![1.5, -2.0]));
        std::fs::write(&p, "y\n3\n0\n").unwrap();
        assert_eq!(read_dataset(&p, Some(Family::Poisson)).unwrap(), Dataset::Count(vec![3, 0]));
        std::fs::write(&p, "y1,y2,z\n1,2,1\n").unwrap();
        assert_eq!(read_dataset(&p, None).unwrap(), Dataset::Pair(vec![[1.0, 2.0]]));
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "y\n1\nabc\n").unwrap();
        let e = read_dataset(&p, None).unwrap_err();
        assert!(matches!(&e, CliError::Parse(m) if m.contains("line 3, field y")), "{e:?}");
        std::fs::write(&p, "y\n1.5\n").unwrap();
        assert!(matches!(read_dataset(&p, Some(Family::Poisson)), Err(CliError::Parse(_))));
        std::fs::write(&p, "x\n1\n").unwrap();
        assert!(matches!(read_dataset(&p, None), Err(CliError::Parse(_))));
        std::fs::write(&p, "y\n1\n").unwrap();
        assert!(matches!(read_dataset(&p, Some(Family::BivariateNormal)), Err(CliError::BadArgs(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a").unwrap();
        write_atomic(&p, b"b").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b");
        assert_eq!(manifest_path(&p), dir.path().join("out.csv.manifest.json"));
    }
}
