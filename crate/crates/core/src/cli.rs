//! Command-line front-end and serialized formats.
//!
//! Points live in JSON files shaped like
//! `{"n": 3, "thetas": [..], "gammas": {"2": [..], "3": [..]}, "xis": {...}}`
//! with all angles in radians. Results are emitted as JSON (default) or CSV;
//! every float is written with 17 significant digits so a parse of the
//! output reproduces the computed bits exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coset::{assemble_density, CMatrix, CosetCoords};
use crate::error::{Error, Result};
use crate::measure::{mc_volume, sample_interior_point, volume_element, VolumeEstimate};
use crate::metric::{coordinate_labels, full_metric, BuresMetric};
use crate::oracle::{bures_distance, fidelity, finite_diff_metric, DEFAULT_FD_STEP};
use crate::spectral::Spectrum;

/// 17 significant digits: enough to reproduce any double exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_f64_array(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", body.join(","))
}

/// On-disk point description. Level keys of `gammas`/`xis` are the decimal
/// level numbers "2".."N".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub n: usize,
    pub thetas: Vec<f64>,
    pub gammas: BTreeMap<String, Vec<f64>>,
    pub xis: BTreeMap<String, Vec<f64>>,
}

impl PointFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates counts, level keys, and ranges, producing a usable point.
    pub fn to_point(&self) -> Result<(Spectrum, CosetCoords)> {
        if self.n < 2 {
            return Err(Error::InvalidPoint(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.thetas.len() != self.n - 1 {
            return Err(Error::InvalidPoint(format!(
                "expected {} thetas for n = {}, got {}",
                self.n - 1,
                self.n,
                self.thetas.len()
            )));
        }
        for (name, map) in [("gammas", &self.gammas), ("xis", &self.xis)] {
            if map.len() != self.n - 1 {
                return Err(Error::InvalidPoint(format!(
                    "{name} must hold exactly the levels 2..={}, got {} entries",
                    self.n,
                    map.len()
                )));
            }
        }
        let mut gammas = Vec::with_capacity(self.n - 1);
        let mut xis = Vec::with_capacity(self.n - 1);
        for m in 2..=self.n {
            let key = m.to_string();
            let g = self.gammas.get(&key).ok_or_else(|| {
                Error::InvalidPoint(format!("gammas is missing level \"{key}\""))
            })?;
            let x = self
                .xis
                .get(&key)
                .ok_or_else(|| Error::InvalidPoint(format!("xis is missing level \"{key}\"")))?;
            gammas.push(g.clone());
            xis.push(x.clone());
        }
        let spectrum = Spectrum::new(self.thetas.clone())?;
        let coords = CosetCoords::new(self.n, gammas, xis)?;
        Ok((spectrum, coords))
    }

    pub fn from_point(s: &Spectrum, coords: &CosetCoords) -> Self {
        let n = s.n();
        let gammas = (2..=n)
            .map(|m| (m.to_string(), coords.gamma(m).to_vec()))
            .collect();
        let xis = (2..=n)
            .map(|m| (m.to_string(), coords.xi(m).to_vec()))
            .collect();
        PointFile {
            n,
            thetas: s.thetas().to_vec(),
            gammas,
            xis,
        }
    }

    /// Serializes with full float precision, levels in numeric order.
    pub fn to_json(&self) -> String {
        let levels = |map: &BTreeMap<String, Vec<f64>>| -> String {
            let body: Vec<String> = (2..=self.n)
                .filter_map(|m| {
                    map.get(&m.to_string())
                        .map(|v| format!("\"{m}\":{}", fmt_f64_array(v)))
                })
                .collect();
            format!("{{{}}}", body.join(","))
        };
        format!(
            "{{\"n\":{},\"thetas\":{},\"gammas\":{},\"xis\":{}}}",
            self.n,
            fmt_f64_array(&self.thetas),
            levels(&self.gammas),
            levels(&self.xis)
        )
    }
}

/// Parsed form of a `metric` output document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDocument {
    pub coordinate_order: Vec<String>,
    pub g_d: Vec<f64>,
    pub g_c: Vec<Vec<f64>>,
    pub sqrt_det_g: f64,
}

/// Reads a metric document back, rejecting label/shape mismatches.
pub fn parse_metric_document(text: &str) -> Result<MetricDocument> {
    let doc: MetricDocument = serde_json::from_str(text)?;
    let total = doc.coordinate_order.len();
    let n = (2..=256)
        .find(|n| n * n - 1 == total)
        .ok_or_else(|| Error::InvalidPoint(format!("{total} labels is not n^2-1 for any n")))?;
    if doc.coordinate_order != coordinate_labels(n) {
        return Err(Error::InvalidPoint(
            "coordinate_order does not match the canonical label order".into(),
        ));
    }
    if doc.g_d.len() != n - 1 {
        return Err(Error::InvalidPoint(format!(
            "g_d must have {} entries, got {}",
            n - 1,
            doc.g_d.len()
        )));
    }
    let coset = n * (n - 1);
    if doc.g_c.len() != coset || doc.g_c.iter().any(|row| row.len() != coset) {
        return Err(Error::InvalidPoint(format!(
            "g_c must be {coset}x{coset} to match the labels"
        )));
    }
    Ok(doc)
}

fn metric_json(metric: &BuresMetric, sqrt_det_g: f64) -> String {
    let labels: Vec<String> = metric
        .coordinate_order()
        .iter()
        .map(|l| format!("\"{l}\""))
        .collect();
    let g_c = metric.g_c();
    let rows: Vec<String> = (0..g_c.nrows())
        .map(|a| fmt_f64_array(&(0..g_c.ncols()).map(|b| g_c[(a, b)]).collect::<Vec<_>>()))
        .collect();
    format!(
        "{{\"coordinate_order\":[{}],\"g_d\":{},\"g_c\":[{}],\"sqrt_det_g\":{}}}",
        labels.join(","),
        fmt_f64_array(metric.g_d().as_slice()),
        rows.join(","),
        fmt_f64(sqrt_det_g)
    )
}

fn metric_csv(metric: &BuresMetric, sqrt_det_g: f64) -> String {
    let labels = metric.coordinate_order();
    let nd = metric.n() - 1;
    let mut out = String::from("block,row,col,value\n");
    for (k, &v) in metric.g_d().iter().enumerate() {
        out.push_str(&format!("g_d,{},{},{}\n", labels[k], labels[k], fmt_f64(v)));
    }
    let g_c = metric.g_c();
    for a in 0..g_c.nrows() {
        for b in 0..g_c.ncols() {
            out.push_str(&format!(
                "g_c,{},{},{}\n",
                labels[nd + a],
                labels[nd + b],
                fmt_f64(g_c[(a, b)])
            ));
        }
    }
    out.push_str(&format!("sqrt_det_g,,,{}\n", fmt_f64(sqrt_det_g)));
    out
}

fn density_json(rho: &CMatrix) -> String {
    let n = rho.nrows();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let entries: Vec<String> = (0..n)
                .map(|j| format!("[{},{}]", fmt_f64(rho[(i, j)].re), fmt_f64(rho[(i, j)].im)))
                .collect();
            format!("[{}]", entries.join(","))
        })
        .collect();
    format!("{{\"n\":{n},\"rho\":[{}]}}", rows.join(","))
}

fn density_csv(rho: &CMatrix) -> String {
    let mut out = String::from("row,col,re,im\n");
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            out.push_str(&format!(
                "{i},{j},{},{}\n",
                fmt_f64(rho[(i, j)].re),
                fmt_f64(rho[(i, j)].im)
            ));
        }
    }
    out
}

/// Result of an oracle-comparison sweep.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub n: usize,
    pub points: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub h: f64,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub pass: bool,
}

/// Samples interior points and compares the closed-form metric against the
/// central-difference reference. An entry passes when
/// |closed - reference| <= max(tolerance, 10·tolerance·|reference|).
///
/// `max_rel_dev` is taken over entries with |reference| >= 1e-6 — below
/// that the absolute floor governs and a relative figure would only
/// measure differencing noise on mathematically zero entries.
pub fn run_check(n: usize, points: u64, seed: u64, tolerance: f64) -> Result<CheckReport> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "n must be at least 2, got {n}"
        )));
    }
    if points == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    let per_point: Vec<Result<(f64, f64, bool)>> = (0..points)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p + 1);
            let (s, coords) = sample_interior_point(n, &mut rng, 0.01, 0.01);
            let closed = full_metric(&s, &coords)?.full_matrix();
            let reference = finite_diff_metric(&s, &coords, DEFAULT_FD_STEP)?;
            let mut max_abs = 0.0f64;
            let mut max_rel = 0.0f64;
            let mut ok = true;
            for a in 0..closed.nrows() {
                for b in 0..closed.ncols() {
                    let dev = (closed[(a, b)] - reference[(a, b)]).abs();
                    let mag = reference[(a, b)].abs();
                    max_abs = max_abs.max(dev);
                    if mag >= 1e-6 {
                        max_rel = max_rel.max(dev / mag);
                    }
                    ok &= dev <= f64::max(tolerance, 10.0 * tolerance * mag);
                }
            }
            Ok((max_abs, max_rel, ok))
        })
        .collect();

    let mut max_abs_dev = 0.0f64;
    let mut max_rel_dev = 0.0f64;
    let mut pass = true;
    for r in per_point {
        let (abs, rel, ok) = r?;
        max_abs_dev = max_abs_dev.max(abs);
        max_rel_dev = max_rel_dev.max(rel);
        pass &= ok;
    }
    Ok(CheckReport {
        n,
        points,
        seed,
        tolerance,
        h: DEFAULT_FD_STEP,
        max_abs_dev,
        max_rel_dev,
        pass,
    })
}

fn check_json(r: &CheckReport) -> String {
    format!(
        "{{\"n\":{},\"points\":{},\"seed\":{},\"tolerance\":{},\"h\":{},\"max_abs_dev\":{},\"max_rel_dev\":{},\"pass\":{}}}",
        r.n,
        r.points,
        r.seed,
        fmt_f64(r.tolerance),
        fmt_f64(r.h),
        fmt_f64(r.max_abs_dev),
        fmt_f64(r.max_rel_dev),
        r.pass
    )
}

fn check_csv(r: &CheckReport) -> String {
    format!(
        "key,value\nn,{}\npoints,{}\nseed,{}\ntolerance,{}\nh,{}\nmax_abs_dev,{}\nmax_rel_dev,{}\npass,{}\n",
        r.n,
        r.points,
        r.seed,
        fmt_f64(r.tolerance),
        fmt_f64(r.h),
        fmt_f64(r.max_abs_dev),
        fmt_f64(r.max_rel_dev),
        r.pass
    )
}

fn volume_json(v: &VolumeEstimate) -> String {
    format!(
        "{{\"n\":{},\"samples\":{},\"seed\":{},\"value\":{},\"std_error\":{},\"rejected\":{},\"chunk_size\":{},\"chunks\":{},\"rng\":\"{}\",\"convention\":\"{}\"}}",
        v.n,
        v.samples,
        v.seed,
        fmt_f64(v.value),
        fmt_f64(v.std_error),
        v.rejected,
        v.chunk_size,
        v.chunks,
        v.rng,
        v.convention
    )
}

fn volume_csv(v: &VolumeEstimate) -> String {
    format!(
        "key,value\nn,{}\nsamples,{}\nseed,{}\nvalue,{}\nstd_error,{}\nrejected,{}\nchunk_size,{}\nchunks,{}\nrng,{}\nconvention,{}\n",
        v.n,
        v.samples,
        v.seed,
        fmt_f64(v.value),
        fmt_f64(v.std_error),
        v.rejected,
        v.chunk_size,
        v.chunks,
        v.rng,
        v.convention
    )
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "bures",
    version,
    about = "Bures metric of N-level density matrices in canonical coset coordinates"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output file (default: stdout)
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the Bures metric blocks and volume element at a point
    Metric {
        /// Point file (JSON)
        #[arg(long)]
        point: PathBuf,
    },
    /// Assemble the density matrix at a point
    Density {
        /// Point file (JSON)
        #[arg(long)]
        point: PathBuf,
    },
    /// Fidelity and Bures distance between two points
    Distance {
        /// First point file (JSON)
        #[arg(long)]
        point: PathBuf,
        /// Second point file (JSON)
        #[arg(long)]
        point_b: PathBuf,
    },
    /// Compare the closed-form metric against the finite-difference
    /// reference at random interior points
    Check {
        /// Level count N
        #[arg(long)]
        n: usize,
        /// Number of sample points
        #[arg(long, default_value_t = 100)]
        samples: u64,
        /// RNG seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Per-entry bound: max(tolerance, 10*tolerance*|reference|)
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Monte Carlo Bures volume (n = 2 or 3)
    Volume {
        /// Level count N
        #[arg(long)]
        n: usize,
        /// Sample count (at least 10000)
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// RNG seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_point(path: &PathBuf) -> Result<(Spectrum, CosetCoords)> {
    PointFile::from_json(&fs::read_to_string(path)?)?.to_point()
}

fn validate_emitted_density(rho: &CMatrix) -> Result<()> {
    let herm = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm > 1e-12 {
        return Err(Error::InvalidState(format!(
            "assembled density lost Hermiticity: {herm:.3e}"
        )));
    }
    let tr: num_complex::Complex64 = rho.diagonal().iter().sum();
    if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
        return Err(Error::InvalidState(format!(
            "assembled density trace is {tr}, expected 1"
        )));
    }
    Ok(())
}

struct Outcome {
    text: String,
    check_failed: bool,
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let mut check_failed = false;
    let text = match &cli.command {
        Command::Metric { point } => {
            let (s, coords) = load_point(point)?;
            let metric = full_metric(&s, &coords)?;
            let sqrt_det_g = volume_element(&s, &coords)?;
            match cli.format {
                Format::Json => metric_json(&metric, sqrt_det_g),
                Format::Csv => metric_csv(&metric, sqrt_det_g),
            }
        }
        Command::Density { point } => {
            let (s, coords) = load_point(point)?;
            let rho = assemble_density(&s, &coords);
            validate_emitted_density(&rho)?;
            match cli.format {
                Format::Json => density_json(&rho),
                Format::Csv => density_csv(&rho),
            }
        }
        Command::Distance { point, point_b } => {
            let (sa, ca) = load_point(point)?;
            let (sb, cb) = load_point(point_b)?;
            if sa.n() != sb.n() {
                return Err(Error::InvalidPoint(format!(
                    "points have different level counts: {} vs {}",
                    sa.n(),
                    sb.n()
                )));
            }
            let rho_a = assemble_density(&sa, &ca);
            let rho_b = assemble_density(&sb, &cb);
            let f = fidelity(&rho_a, &rho_b)?;
            let d = bures_distance(&rho_a, &rho_b)?;
            match cli.format {
                Format::Json => format!(
                    "{{\"fidelity\":{},\"bures_distance\":{}}}",
                    fmt_f64(f),
                    fmt_f64(d)
                ),
                Format::Csv => format!(
                    "key,value\nfidelity,{}\nbures_distance,{}\n",
                    fmt_f64(f),
                    fmt_f64(d)
                ),
            }
        }
        Command::Check {
            n,
            samples,
            seed,
            tolerance,
        } => {
            let report = run_check(*n, *samples, *seed, *tolerance)?;
            check_failed = !report.pass;
            match cli.format {
                Format::Json => check_json(&report),
                Format::Csv => check_csv(&report),
            }
        }
        Command::Volume { n, samples, seed } => {
            let estimate = mc_volume(*n, *samples, *seed)?;
            match cli.format {
                Format::Json => volume_json(&estimate),
                Format::Csv => volume_csv(&estimate),
            }
        }
    };
    Ok(Outcome { text, check_failed })
}

/// Parses arguments, runs the command, and returns the process exit code:
/// 0 on success, 1 when a check sweep fails, 2 on input/validation errors.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            let payload = if outcome.text.ends_with('\n') {
                outcome.text
            } else {
                format!("{}\n", outcome.text)
            };
            let write_result = match &cli.output {
                Some(path) => fs::write(path, &payload),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(payload.as_bytes())
                }
            };
            if let Err(e) = write_result {
                eprintln!("error: {e}");
                return 2;
            }
            if outcome.check_failed {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_point_file(n: usize) -> PointFile {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let (s, coords) = sample_interior_point(n, &mut rng, 0.02, 0.02);
        PointFile::from_point(&s, &coords)
    }

    #[test]
    fn float_formatting_round_trips_bits() {
        for x in [
            1.0,
            -0.0,
            std::f64::consts::PI,
            1.2337005501361697,
            3.9e-300,
            -7.234567890123456e17,
        ] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x:?}");
        }
    }

    #[test]
    fn point_file_round_trips_through_json() {
        let pf = sample_point_file(3);
        let parsed = PointFile::from_json(&pf.to_json()).unwrap();
        assert_eq!(parsed.n, 3);
        assert_eq!(parsed.thetas, pf.thetas);
        assert_eq!(parsed.gammas, pf.gammas);
        assert_eq!(parsed.xis, pf.xis);
        parsed.to_point().unwrap();
    }

    #[test]
    fn point_file_rejects_shape_mismatches() {
        let mut pf = sample_point_file(3);
        pf.thetas.push(0.1);
        assert!(matches!(pf.to_point(), Err(Error::InvalidPoint(_))));

        let mut pf = sample_point_file(3);
        pf.gammas.get_mut("3").unwrap().pop();
        assert!(matches!(pf.to_point(), Err(Error::InvalidCoords(_))));

        let mut pf = sample_point_file(3);
        pf.gammas.remove("3");
        assert!(matches!(pf.to_point(), Err(Error::InvalidPoint(_))));

        let mut pf = sample_point_file(3);
        pf.xis.insert("4".into(), vec![0.0; 3]);
        assert!(matches!(pf.to_point(), Err(Error::InvalidPoint(_))));

        let mut pf = sample_point_file(2);
        pf.thetas[0] = 2.0; // outside [0, pi/2]
        assert!(pf.to_point().is_err());
    }

    #[test]
    fn metric_document_round_trips_and_validates() {
        let pf = sample_point_file(3);
        let (s, coords) = pf.to_point().unwrap();
        let metric = full_metric(&s, &coords).unwrap();
        let sqrt_det_g = volume_element(&s, &coords).unwrap();
        let text = metric_json(&metric, sqrt_det_g);
        let doc = parse_metric_document(&text).unwrap();
        assert_eq!(doc.coordinate_order, coordinate_labels(3));
        assert_eq!(doc.sqrt_det_g.to_bits(), sqrt_det_g.to_bits());
        for (k, &v) in metric.g_d().iter().enumerate() {
            assert_eq!(doc.g_d[k].to_bits(), v.to_bits());
        }
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(doc.g_c[a][b].to_bits(), metric.g_c()[(a, b)].to_bits());
            }
        }

        // reader rejects a permuted label list
        let bad = text.replace("\"theta_1\",\"theta_2\"", "\"theta_2\",\"theta_1\"");
        assert!(parse_metric_document(&bad).is_err());
    }

    #[test]
    fn check_passes_at_default_tolerance_and_fails_at_zero() {
        let report = run_check(2, 10, 7, 1e-6).unwrap();
        assert!(report.pass, "max_abs_dev {:e}", report.max_abs_dev);
        assert!(report.max_abs_dev < 1e-6);

        let strict = run_check(2, 10, 7, 0.0).unwrap();
        assert!(!strict.pass);

        // same seed, same deviations
        let again = run_check(2, 10, 7, 1e-6).unwrap();
        assert_eq!(report.max_abs_dev.to_bits(), again.max_abs_dev.to_bits());
        assert_eq!(report.max_rel_dev.to_bits(), again.max_rel_dev.to_bits());
    }
}
