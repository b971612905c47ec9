//! Scenario configuration: radar hardware, network topology, target ground truth
//! and the simulation knobs, together with the line-oriented scenario file format.
//!
//! A scenario file is a sequence of `[section]` headers followed by `key = value`
//! lines. Everything after `#` on a line is a comment. Sections:
//!
//! ```text
//! [radar]      n_tx, n_rx, pulses_per_cpi, n_bins, kappa, total_power, pri_seconds, pfa_nominal
//! [network]    n_radars, fusion_mode, bin_mapping (one line per radar), rng_seeds
//! [timeline]   n_cpis, t_max, m_acq, n_acq
//! [target]     cpi_start, cpi_end, bin, snr_db_per_radar   (one section per event)
//! [clutter]    model, innovation, nu, sigma2, p, q, phi, burn_in, shared_across_bins
//! [detector]   lag_rule, kappa_cap
//! [agent]      learning_rate, discount, epsilon, epsilon_final, epsilon_decay_cpis
//! [metrics]    exclude_adjacent
//! ```
//!
//! `snr_db_per_radar` holds one comma-separated entry per radar. Each entry is
//! either a constant in dB or a whitespace-separated list of `cpi:dB` knots that
//! are interpolated linearly (and held constant outside the knot range).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::clutter::{ClutterConfig, Innovation, Structure};
use crate::cognition::AgentConfig;
use crate::detector::{DetectorConfig, LagRule};
use crate::error::{Error, Result};
use crate::montecarlo::MetricsConfig;
use num_complex::Complex64;

/// Radar hardware and detector design parameters shared by every radar in a network.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    /// Transmit antennas.
    pub n_tx: usize,
    /// Receive antennas.
    pub n_rx: usize,
    /// Pulses per coherent processing interval.
    pub pulses_per_cpi: usize,
    /// Angle bins partitioning the 180 degree search sector.
    pub n_bins: usize,
    /// Banding exponent used to derive the covariance truncation lag.
    pub kappa: f64,
    /// Total transmit power, `tr(W W^H)`.
    pub total_power: f64,
    pub pri_seconds: f64,
    /// Design false-alarm probability.
    pub pfa_nominal: f64,
}

impl RadarParams {
    /// Full-size radar: 10 x 10 antennas, 100 pulses, 20 bins.
    pub fn full_scale() -> Self {
        RadarParams {
            n_tx: 10,
            n_rx: 10,
            pulses_per_cpi: 100,
            n_bins: 20,
            kappa: 0.8,
            total_power: 1.0,
            pri_seconds: 5e-6,
            pfa_nominal: 1e-4,
        }
    }

    /// Desk-scale profile: 4 x 4 antennas, 32 pulses (N = 512), 20 bins.
    pub fn desk() -> Self {
        RadarParams {
            n_tx: 4,
            n_rx: 4,
            pulses_per_cpi: 32,
            ..Self::full_scale()
        }
    }

    /// Number of virtual spatial channels, `N_T * M_R`.
    pub fn n_spatial(&self) -> usize {
        self.n_tx * self.n_rx
    }

    /// Length of one CPI return, `N = N_T * M_R * K`.
    pub fn n_samples(&self) -> usize {
        self.n_spatial() * self.pulses_per_cpi
    }

    pub fn cpi_seconds(&self) -> f64 {
        self.pri_seconds * self.pulses_per_cpi as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.pulses_per_cpi == 0 || self.n_bins == 0 {
            return Err(Error::Validation(
                "n_tx, n_rx, pulses_per_cpi and n_bins must be at least 1".into(),
            ));
        }
        if self.n_samples() < 2 {
            return Err(Error::Validation(format!(
                "N = n_tx * n_rx * pulses_per_cpi must be at least 2, got {}",
                self.n_samples()
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Validation(format!("kappa must lie in (0,1), got {}", self.kappa)));
        }
        if !(self.pfa_nominal > 0.0 && self.pfa_nominal < 1.0) {
            return Err(Error::Validation(format!(
                "pfa_nominal must lie in (0,1), got {}",
                self.pfa_nominal
            )));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(Error::Validation("total_power must be positive".into()));
        }
        if !(self.pri_seconds > 0.0 && self.pri_seconds.is_finite()) {
            return Err(Error::Validation("pri_seconds must be positive".into()));
        }
        Ok(())
    }
}

/// Element-level SNR trajectory of one target as seen by one radar.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrCurve {
    Constant(f64),
    /// `(cpi, dB)` knots with strictly increasing CPI.
    Knots(Vec<(usize, f64)>),
}

impl SnrCurve {
    /// SNR in dB at CPI `p`.
    pub fn at(&self, p: usize) -> f64 {
        match self {
            SnrCurve::Constant(db) => *db,
            SnrCurve::Knots(knots) => {
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if p <= first.0 {
                    return first.1;
                }
                if p >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|&(c, _)| c <= p);
                let (c0, d0) = knots[i - 1];
                let (c1, d1) = knots[i];
                d0 + (d1 - d0) * (p - c0) as f64 / (c1 - c0) as f64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SnrCurve::Constant(db) if db.is_finite() => Ok(()),
            SnrCurve::Constant(_) => Err(Error::Validation("SNR must be finite".into())),
            SnrCurve::Knots(knots) => {
                if knots.is_empty() {
                    return Err(Error::Validation("SNR knot list is empty".into()));
                }
                if knots.iter().any(|(_, db)| !db.is_finite()) {
                    return Err(Error::Validation("SNR must be finite".into()));
                }
                if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Validation(
                        "SNR knots must have strictly increasing CPI".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn render(&self) -> String {
        match self {
            SnrCurve::Constant(db) => format!("{db}"),
            SnrCurve::Knots(knots) => knots
                .iter()
                .map(|(c, db)| format!("{c}:{db}"))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

/// One target present in reference bin `bin` over CPIs `cpi_start..=cpi_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEvent {
    pub cpi_start: usize,
    pub cpi_end: usize,
    /// Reference-radar angle bin.
    pub bin: usize,
    /// One SNR curve per radar.
    pub snr_db_per_radar: Vec<SnrCurve>,
}

impl TargetEvent {
    pub fn is_active(&self, p: usize) -> bool {
        self.cpi_start <= p && p <= self.cpi_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Centralized,
    Decentralized,
    None,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Centralized => "centralized",
            FusionMode::Decentralized => "decentralized",
            FusionMode::None => "none",
        }
    }
}

impl std::str::FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "centralized" => Ok(FusionMode::Centralized),
            "decentralized" => Ok(FusionMode::Decentralized),
            "none" => Ok(FusionMode::None),
            other => Err(format!("unknown fusion mode '{other}'")),
        }
    }
}

/// Network topology. `bin_mapping[i][l]` is the bin of radar `i` that sees the
/// same angular cell as bin `l` of the reference radar.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_radars: usize,
    pub bin_mapping: Vec<Vec<usize>>,
    pub fusion_mode: FusionMode,
    pub rng_seeds: Vec<u64>,
}

impl NetworkConfig {
    pub fn single(n_bins: usize) -> Self {
        NetworkConfig {
            n_radars: 1,
            bin_mapping: vec![(0..n_bins).collect()],
            fusion_mode: FusionMode::None,
            rng_seeds: vec![1],
        }
    }

    /// Radar `radar`'s bin for reference bin `l`.
    pub fn local_bin(&self, radar: usize, l: usize) -> usize {
        self.bin_mapping[radar][l]
    }

    pub fn validate(&self, n_bins: usize) -> Result<()> {
        if self.n_radars == 0 {
            return Err(Error::Validation("n_radars must be at least 1".into()));
        }
        if self.bin_mapping.len() != self.n_radars {
            return Err(Error::Validation(format!(
                "expected {} bin_mapping lines, got {}",
                self.n_radars,
                self.bin_mapping.len()
            )));
        }
        for (i, map) in self.bin_mapping.iter().enumerate() {
            let mut seen = vec![false; n_bins];
            if map.len() != n_bins {
                return Err(Error::Validation(format!(
                    "bijection violated: bin_mapping of radar {i} has {} entries for {n_bins} bins",
                    map.len()
                )));
            }
            for &q in map {
                if q >= n_bins || seen[q] {
                    return Err(Error::Validation(format!(
                        "bijection violated: bin_mapping of radar {i} repeats or exceeds bin {q}"
                    )));
                }
                seen[q] = true;
            }
        }
        if self.rng_seeds.len() != self.n_radars {
            return Err(Error::Validation(format!(
                "expected {} rng_seeds, got {}",
                self.n_radars,
                self.rng_seeds.len()
            )));
        }
        let mut seeds = self.rng_seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("rng_seeds must be pairwise distinct".into()));
        }
        if self.n_radars > 1 && self.fusion_mode == FusionMode::None {
            return Err(Error::Validation(
                "fusion_mode none requires a single radar".into(),
            ));
        }
        Ok(())
    }
}

/// Target ground truth over the whole run plus the acquisition rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTimeline {
    pub n_cpis: usize,
    pub events: Vec<TargetEvent>,
    /// Maximum number of simultaneous targets (also the largest action).
    pub t_max: usize,
    pub m_acq: usize,
    pub n_acq: usize,
}

/// A target active at one CPI.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTarget {
    pub bin: usize,
    pub snr_db: Vec<f64>,
}

impl ScenarioTimeline {
    pub fn empty(n_cpis: usize) -> Self {
        ScenarioTimeline { n_cpis, events: Vec::new(), t_max: 5, m_acq: 3, n_acq: 5 }
    }

    /// Targets active at CPI `p`, with SNR curves evaluated at `p`.
    pub fn active_targets(&self, p: usize) -> Result<Vec<ActiveTarget>> {
        if p >= self.n_cpis {
            return Err(Error::Domain(format!("cpi {p} out of range 0..{}", self.n_cpis)));
        }
        Ok(self
            .events
            .iter()
            .filter(|e| e.is_active(p))
            .map(|e| ActiveTarget {
                bin: e.bin,
                snr_db: e.snr_db_per_radar.iter().map(|c| c.at(p)).collect(),
            })
            .collect())
    }

    /// Distinct reference bins that ever hold a target, ascending.
    pub fn target_bins(&self) -> Vec<usize> {
        let mut bins: Vec<usize> = self.events.iter().map(|e| e.bin).collect();
        bins.sort_unstable();
        bins.dedup();
        bins
    }

    /// Whether reference bin `bin` holds a target at CPI `p`.
    pub fn is_occupied(&self, p: usize, bin: usize) -> bool {
        self.events.iter().any(|e| e.bin == bin && e.is_active(p))
    }

    pub fn validate(&self, n_bins: usize, n_radars: usize) -> Result<()> {
        if self.n_cpis == 0 {
            return Err(Error::Validation("n_cpis must be at least 1".into()));
        }
        if self.m_acq == 0 || self.m_acq > self.n_acq {
            return Err(Error::Validation(format!(
                "acquisition rule needs 1 <= m_acq <= n_acq, got {} of {}",
                self.m_acq, self.n_acq
            )));
        }
        for (k, e) in self.events.iter().enumerate() {
            if e.cpi_start > e.cpi_end || e.cpi_end >= self.n_cpis {
                return Err(Error::Validation(format!(
                    "target {k}: need cpi_start <= cpi_end < n_cpis"
                )));
            }
            if e.bin >= n_bins {
                return Err(Error::Validation(format!("target {k}: bin {} >= L", e.bin)));
            }
            if e.snr_db_per_radar.len() != n_radars {
                return Err(Error::Validation(format!(
                    "target {k}: {} SNR entries for {n_radars} radars",
                    e.snr_db_per_radar.len()
                )));
            }
            for c in &e.snr_db_per_radar {
                c.validate()?;
            }
        }
        for p in 0..self.n_cpis {
            let mut bins: Vec<usize> =
                self.events.iter().filter(|e| e.is_active(p)).map(|e| e.bin).collect();
            if bins.len() > self.t_max {
                return Err(Error::Validation(format!(
                    "cpi {p}: {} active targets exceed t_max = {}",
                    bins.len(),
                    self.t_max
                )));
            }
            bins.sort_unstable();
            if bins.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!("cpi {p}: two targets share a bin")));
            }
        }
        Ok(())
    }
}

/// Fully validated simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radar: RadarParams,
    pub network: NetworkConfig,
    pub timeline: ScenarioTimeline,
    pub clutter: ClutterConfig,
    pub detector: DetectorConfig,
    pub agent: AgentConfig,
    pub metrics: MetricsConfig,
}

impl Scenario {
    /// Single-radar scenario with default knobs and no targets.
    pub fn new(radar: RadarParams, n_cpis: usize) -> Self {
        let n_bins = radar.n_bins;
        Scenario {
            radar,
            network: NetworkConfig::single(n_bins),
            timeline: ScenarioTimeline::empty(n_cpis),
            clutter: ClutterConfig::default(),
            detector: DetectorConfig::default(),
            agent: AgentConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.network.validate(self.radar.n_bins)?;
        self.timeline.validate(self.radar.n_bins, self.network.n_radars)?;
        self.clutter.validate()?;
        self.detector.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    /// The same ground truth observed by radar `radar` alone.
    pub fn single_radar(&self, radar: usize) -> Result<Scenario> {
        if radar >= self.network.n_radars {
            return Err(Error::Domain(format!("radar {radar} not in network")));
        }
        let mut s = self.clone();
        s.network = NetworkConfig {
            n_radars: 1,
            bin_mapping: vec![self.network.bin_mapping[radar].clone()],
            fusion_mode: FusionMode::None,
            rng_seeds: vec![self.network.rng_seeds[radar]],
        };
        for e in &mut s.timeline.events {
            e.snr_db_per_radar = vec![e.snr_db_per_radar[radar].clone()];
        }
        Ok(s)
    }

    /// Serializes to the scenario file format; `load_scenario` inverts this exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let r = &self.radar;
        let _ = writeln!(out, "[radar]");
        let _ = writeln!(out, "n_tx = {}", r.n_tx);
        let _ = writeln!(out, "n_rx = {}", r.n_rx);
        let _ = writeln!(out, "pulses_per_cpi = {}", r.pulses_per_cpi);
        let _ = writeln!(out, "n_bins = {}", r.n_bins);
        let _ = writeln!(out, "kappa = {}", r.kappa);
        let _ = writeln!(out, "total_power = {}", r.total_power);
        let _ = writeln!(out, "pri_seconds = {}", r.pri_seconds);
        let _ = writeln!(out, "pfa_nominal = {}", r.pfa_nominal);

        let n = &self.network;
        let _ = writeln!(out, "\n[network]");
        let _ = writeln!(out, "n_radars = {}", n.n_radars);
        let _ = writeln!(out, "fusion_mode = {}", n.fusion_mode.as_str());
        for map in &n.bin_mapping {
            let _ = writeln!(out, "bin_mapping = {}", join(map, " "));
        }
        let _ = writeln!(out, "rng_seeds = {}", join(&n.rng_seeds, ", "));

        let t = &self.timeline;
        let _ = writeln!(out, "\n[timeline]");
        let _ = writeln!(out, "n_cpis = {}", t.n_cpis);
        let _ = writeln!(out, "t_max = {}", t.t_max);
        let _ = writeln!(out, "m_acq = {}", t.m_acq);
        let _ = writeln!(out, "n_acq = {}", t.n_acq);
        for e in &t.events {
            let _ = writeln!(out, "\n[target]");
            let _ = writeln!(out, "cpi_start = {}", e.cpi_start);
            let _ = writeln!(out, "cpi_end = {}", e.cpi_end);
            let _ = writeln!(out, "bin = {}", e.bin);
            let snr: Vec<String> = e.snr_db_per_radar.iter().map(SnrCurve::render).collect();
            let _ = writeln!(out, "snr_db_per_radar = {}", snr.join(", "));
        }

        let c = &self.clutter;
        let _ = writeln!(out, "\n[clutter]");
        match &c.structure {
            Structure::Default => {
                let _ = writeln!(out, "model = default");
            }
            Structure::White => {
                let _ = writeln!(out, "model = white");
            }
            Structure::Custom { p, q, phi } => {
                let _ = writeln!(out, "model = custom");
                let _ = writeln!(out, "p = {p}");
                let _ = writeln!(out, "q = {q}");
                let entries: Vec<String> =
                    phi.iter().map(|z| format!("{}:{}", z.re, z.im)).collect();
                let _ = writeln!(out, "phi = {}", entries.join(" "));
            }
        }
        match c.innovation {
            Innovation::ComplexGaussian { sigma2 } => {
                let _ = writeln!(out, "innovation = gaussian");
                let _ = writeln!(out, "sigma2 = {sigma2}");
            }
            Innovation::ComplexT { nu, sigma2 } => {
                let _ = writeln!(out, "innovation = t");
                let _ = writeln!(out, "nu = {nu}");
                let _ = writeln!(out, "sigma2 = {sigma2}");
            }
        }
        let _ = writeln!(out, "burn_in = {}", c.burn_in);
        let _ = writeln!(out, "shared_across_bins = {}", c.shared_across_bins);

        let _ = writeln!(out, "\n[detector]");
        match self.detector.lag_rule {
            LagRule::Complement => {
                let _ = writeln!(out, "lag_rule = complement");
            }
            LagRule::Capped { cap } => {
                let _ = writeln!(out, "lag_rule = capped");
                let _ = writeln!(out, "kappa_cap = {cap}");
            }
        }

        let a = &self.agent;
        let _ = writeln!(out, "\n[agent]");
        let _ = writeln!(out, "learning_rate = {}", a.learning_rate);
        let _ = writeln!(out, "discount = {}", a.discount);
        let _ = writeln!(out, "epsilon = {}", a.epsilon);
        let _ = writeln!(out, "epsilon_final = {}", a.epsilon_final);
        let _ = writeln!(out, "epsilon_decay_cpis = {}", a.epsilon_decay_cpis);

        let _ = writeln!(out, "\n[metrics]");
        let _ = writeln!(out, "exclude_adjacent = {}", self.metrics.exclude_adjacent);
        out
    }
}

fn join<T: std::fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// A `key = value` line tagged with its source line number.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    keys: BTreeMap<String, Vec<Entry>>,
}

impl Section {
    fn take(&mut self, key: &str) -> Result<Option<Entry>> {
        match self.keys.remove(key) {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(v) => Err(Error::parse(v[1].line, format!("duplicate key '{key}'"))),
        }
    }

    fn take_all(&mut self, key: &str) -> Vec<Entry> {
        self.keys.remove(key).unwrap_or_default()
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key)? {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(e.line, format!("invalid value for '{key}': '{}'", e.value))),
        }
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str, section: &str) -> Result<T> {
        let line = self.line;
        self.parsed(key)?
            .ok_or_else(|| Error::parse(line, format!("[{section}] is missing '{key}'")))
    }

    fn finish(self, section: &str) -> Result<()> {
        if let Some((key, entries)) = self.keys.into_iter().next() {
            return Err(Error::parse(
                entries[0].line,
                format!("unknown key '{key}' in [{section}]"),
            ));
        }
        Ok(())
    }
}

fn split_sections(text: &str) -> Result<Vec<(String, Section)>> {
    let mut sections: Vec<(String, Section)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                .trim();
            sections.push((name.to_string(), Section { line: line_no, ..Section::default() }));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected 'key = value', got '{line}'")))?;
        let (_, section) = sections
            .last_mut()
            .ok_or_else(|| Error::parse(line_no, "key outside of any section"))?;
        section
            .keys
            .entry(key.trim().to_string())
            .or_default()
            .push(Entry { line: line_no, value: value.trim().to_string() });
    }
    Ok(sections)
}

fn parse_list<T: std::str::FromStr>(entry: &Entry, sep: char) -> Result<Vec<T>> {
    entry
        .value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::parse(entry.line, format!("invalid list element '{s}'")))
        })
        .collect()
}

fn parse_snr_entry(s: &str, line: usize) -> Result<SnrCurve> {
    let s = s.trim();
    if !s.contains(':') {
        return s
            .parse::<f64>()
            .map(SnrCurve::Constant)
            .map_err(|_| Error::parse(line, format!("invalid SNR '{s}'")));
    }
    let mut knots = Vec::new();
    for tok in s.split_whitespace() {
        let (c, db) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(line, format!("invalid SNR knot '{tok}'")))?;
        let c = c.parse::<usize>().map_err(|_| Error::parse(line, format!("invalid knot CPI '{c}'")))?;
        let db = db.parse::<f64>().map_err(|_| Error::parse(line, format!("invalid knot dB '{db}'")))?;
        knots.push((c, db));
    }
    Ok(SnrCurve::Knots(knots))
}

fn parse_phi(entry: &Entry) -> Result<Vec<Complex64>> {
    entry
        .value
        .split_whitespace()
        .map(|tok| {
            let bad = || Error::parse(entry.line, format!("invalid phi entry '{tok}'"));
            let (re, im) = match tok.split_once(':') {
                Some((re, im)) => (re, im),
                None => (tok, "0"),
            };
            Ok(Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
        })
        .collect()
}

fn parse_clutter(mut sec: Section, base: &ClutterConfig) -> Result<ClutterConfig> {
    let structure = match sec.take("model")? {
        None => Structure::Default,
        Some(e) => match e.value.as_str() {
            "default" => Structure::Default,
            "white" => Structure::White,
            "custom" => {
                let p: usize = sec.required("p", "clutter")?;
                let q: usize = sec.required("q", "clutter")?;
                let phi_entry = sec
                    .take("phi")?
                    .ok_or_else(|| Error::parse(e.line, "custom model needs 'phi'"))?;
                let phi = parse_phi(&phi_entry)?;
                Structure::Custom { p, q, phi }
            }
            other => {
                return Err(Error::parse(e.line, format!("unknown clutter model '{other}'")))
            }
        },
    };
    let sigma2: f64 = sec.parsed("sigma2")?.unwrap_or(1.0);
    let kind = sec.take("innovation")?;
    let nu: Option<f64> = sec.parsed("nu")?;
    let innovation = match kind.as_ref().map(|e| e.value.as_str()) {
        None | Some("t") => Innovation::ComplexT { nu: nu.unwrap_or(2.0), sigma2 },
        Some("gaussian") => {
            if let Some(_nu) = nu {
                return Err(Error::parse(sec.line, "'nu' given for gaussian innovations"));
            }
            Innovation::ComplexGaussian { sigma2 }
        }
        Some(other) => {
            let line = kind.as_ref().map(|e| e.line).unwrap_or(sec.line);
            return Err(Error::parse(line, format!("unknown innovation '{other}'")));
        }
    };
    let cfg = ClutterConfig {
        structure,
        innovation,
        burn_in: sec.parsed("burn_in")?.unwrap_or(base.burn_in),
        shared_across_bins: sec.parsed("shared_across_bins")?.unwrap_or(base.shared_across_bins),
    };
    sec.finish("clutter")?;
    Ok(cfg)
}

/// Clutter configuration from a text holding only a `[clutter]` section.
pub fn load_clutter(text: &str) -> Result<ClutterConfig> {
    let mut out = None;
    for (name, sec) in split_sections(text)? {
        if name != "clutter" || out.is_some() {
            return Err(Error::parse(sec.line, format!("expected a single [clutter] section, found [{name}]")));
        }
        out = Some(parse_clutter(sec, &ClutterConfig::default())?);
    }
    let cfg = out.ok_or_else(|| Error::parse(1, "no [clutter] section"))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses and validates a scenario file.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let sections = split_sections(text)?;
    let mut radar: Option<RadarParams> = None;
    let mut network: Option<(Section, usize)> = None;
    let mut timeline_sec: Option<Section> = None;
    let mut target_secs: Vec<Section> = Vec::new();
    let mut clutter = ClutterConfig::default();
    let mut detector = DetectorConfig::default();
    let mut agent = AgentConfig::default();
    let mut metrics = MetricsConfig::default();
    let mut seen_singletons: Vec<String> = Vec::new();

    for (name, mut sec) in sections {
        if name != "target" {
            if seen_singletons.contains(&name) {
                return Err(Error::parse(sec.line, format!("duplicate section [{name}]")));
            }
            seen_singletons.push(name.clone());
        }
        match name.as_str() {
            "radar" => {
                let defaults = RadarParams::full_scale();
                let r = RadarParams {
                    n_tx: sec.required("n_tx", "radar")?,
                    n_rx: sec.required("n_rx", "radar")?,
                    pulses_per_cpi: sec.required("pulses_per_cpi", "radar")?,
                    n_bins: sec.required("n_bins", "radar")?,
                    kappa: sec.parsed("kappa")?.unwrap_or(defaults.kappa),
                    total_power: sec.parsed("total_power")?.unwrap_or(defaults.total_power),
                    pri_seconds: sec.parsed("pri_seconds")?.unwrap_or(defaults.pri_seconds),
                    pfa_nominal: sec.required("pfa_nominal", "radar")?,
                };
                sec.finish("radar")?;
                radar = Some(r);
            }
            "network" => {
                let line = sec.line;
                network = Some((sec, line));
            }
            "timeline" => timeline_sec = Some(sec),
            "target" => target_secs.push(sec),
            "clutter" => clutter = parse_clutter(sec, &clutter)?,
            "detector" => {
                let rule = sec.take("lag_rule")?;
                let cap: Option<f64> = sec.parsed("kappa_cap")?;
                detector.lag_rule = match rule.as_ref().map(|e| e.value.as_str()) {
                    None | Some("complement") => {
                        if cap.is_some() {
                            return Err(Error::parse(sec.line, "'kappa_cap' only applies to lag_rule = capped"));
                        }
                        LagRule::Complement
                    }
                    Some("capped") => LagRule::Capped { cap: cap.unwrap_or(0.5) },
                    Some(other) => {
                        let line = rule.as_ref().map(|e| e.line).unwrap_or(sec.line);
                        return Err(Error::parse(line, format!("unknown lag_rule '{other}'")));
                    }
                };
                sec.finish("detector")?;
            }
            "agent" => {
                let d = AgentConfig::default();
                agent = AgentConfig {
                    learning_rate: sec.parsed("learning_rate")?.unwrap_or(d.learning_rate),
                    discount: sec.parsed("discount")?.unwrap_or(d.discount),
                    epsilon: sec.parsed("epsilon")?.unwrap_or(d.epsilon),
                    epsilon_final: sec.parsed("epsilon_final")?.unwrap_or(d.epsilon_final),
                    epsilon_decay_cpis: sec
                        .parsed("epsilon_decay_cpis")?
                        .unwrap_or(d.epsilon_decay_cpis),
                };
                sec.finish("agent")?;
            }
            "metrics" => {
                metrics.exclude_adjacent = sec.parsed("exclude_adjacent")?.unwrap_or(false);
                sec.finish("metrics")?;
            }
            other => return Err(Error::parse(sec.line, format!("unknown section [{other}]"))),
        }
    }

    let radar = radar.ok_or_else(|| Error::parse(0, "missing [radar] section"))?;
    let network = match network {
        None => NetworkConfig::single(radar.n_bins),
        Some((mut sec, _line)) => {
            let n_radars: usize = sec.parsed("n_radars")?.unwrap_or(1);
            let fusion_mode = match sec.take("fusion_mode")? {
                None if n_radars == 1 => FusionMode::None,
                None => FusionMode::Decentralized,
                Some(e) => e.value.parse().map_err(|msg: String| Error::parse(e.line, msg))?,
            };
            let maps = sec.take_all("bin_mapping");
            let bin_mapping = if maps.is_empty() {
                vec![(0..radar.n_bins).collect(); n_radars]
            } else {
                maps.iter().map(|e| parse_list::<usize>(e, ' ')).collect::<Result<_>>()?
            };
            let rng_seeds = match sec.take("rng_seeds")? {
                None => (1..=n_radars as u64).collect(),
                Some(e) => parse_list::<u64>(&e, ',')?,
            };
            sec.finish("network")?;
            NetworkConfig { n_radars, bin_mapping, fusion_mode, rng_seeds }
        }
    };

    let mut timeline = ScenarioTimeline::empty(1);
    if let Some(mut sec) = timeline_sec {
        timeline.n_cpis = sec.required("n_cpis", "timeline")?;
        timeline.t_max = sec.parsed("t_max")?.unwrap_or(timeline.t_max);
        timeline.m_acq = sec.parsed("m_acq")?.unwrap_or(timeline.m_acq);
        timeline.n_acq = sec.parsed("n_acq")?.unwrap_or(timeline.n_acq);
        sec.finish("timeline")?;
    } else {
        return Err(Error::parse(0, "missing [timeline] section"));
    }
    for mut sec in target_secs {
        let snr_entry = sec
            .take("snr_db_per_radar")?
            .ok_or_else(|| Error::parse(sec.line, "[target] is missing 'snr_db_per_radar'"))?;
        let snr_db_per_radar = snr_entry
            .value
            .split(',')
            .map(|s| parse_snr_entry(s, snr_entry.line))
            .collect::<Result<Vec<_>>>()?;
        let event = TargetEvent {
            cpi_start: sec.required("cpi_start", "target")?,
            cpi_end: sec.required("cpi_end", "target")?,
            bin: sec.required("bin", "target")?,
            snr_db_per_radar,
        };
        sec.finish("target")?;
        timeline.events.push(event);
    }

    let scenario = Scenario { radar, network, timeline, clutter, detector, agent, metrics };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SCENARIO_1: &str = "\
[radar]
n_tx = 10
n_rx = 10
pulses_per_cpi = 100
n_bins = 20
kappa = 0.8
pri_seconds = 5e-6
pfa_nominal = 1e-4

[timeline]
n_cpis = 400

[target]   # leaves at 100
cpi_start = 0
cpi_end = 99
bin = 5
snr_db_per_radar = -18

[target]
cpi_start = 0
cpi_end = 299
bin = 13
snr_db_per_radar = -21

[target]
cpi_start = 200
cpi_end = 299
bin = 17
snr_db_per_radar = -20

[target]
cpi_start = 300
cpi_end = 399
bin = 17
snr_db_per_radar = -20
";

    #[test]
    fn table_one_radar_block() {
        let s = load_scenario(SCENARIO_1).unwrap();
        assert_eq!(s.radar.n_samples(), 10_000);
        assert_eq!(s.radar.n_bins, 20);
        assert_eq!(s.radar.kappa, 0.8);
        assert_eq!(s.radar.pfa_nominal, 1e-4);
        assert_eq!(s.radar.pri_seconds, 5e-6);
        assert_eq!(s.radar, RadarParams::full_scale());
    }

    #[test]
    fn scenario_one_events() {
        let s = load_scenario(SCENARIO_1).unwrap();
        assert_eq!(s.timeline.events.len(), 4);
        assert_eq!(s.timeline.n_cpis, 400);
        let t = &s.timeline;
        assert_eq!(
            t.active_targets(150).unwrap(),
            vec![ActiveTarget { bin: 13, snr_db: vec![-21.0] }]
        );
        assert_eq!(
            t.active_targets(250).unwrap(),
            vec![
                ActiveTarget { bin: 13, snr_db: vec![-21.0] },
                ActiveTarget { bin: 17, snr_db: vec![-20.0] }
            ]
        );
        assert_eq!(t.target_bins(), vec![5, 13, 17]);
        assert!(t.active_targets(400).is_err());
    }

    #[test]
    fn empty_timeline_has_no_targets() {
        let t = ScenarioTimeline::empty(10);
        for p in 0..10 {
            assert!(t.active_targets(p).unwrap().is_empty());
        }
    }

    #[test]
    fn repeated_bin_in_mapping_is_rejected() {
        let text = "\
[radar]
n_tx = 2
n_rx = 2
pulses_per_cpi = 4
n_bins = 3
pfa_nominal = 0.01
[network]
n_radars = 2
fusion_mode = decentralized
bin_mapping = 0 1 2
bin_mapping = 0 0 2
rng_seeds = 1, 2
[timeline]
n_cpis = 5
";
        let err = load_scenario(text).unwrap_err();
        assert!(err.to_string().contains("bijection violated"), "{err}");
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let mut s = Scenario::new(RadarParams::desk(), 3);
        s.network = NetworkConfig {
            n_radars: 2,
            bin_mapping: vec![(0..20).collect(); 2],
            fusion_mode: FusionMode::Centralized,
            rng_seeds: vec![4, 4],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn too_many_targets_or_shared_bin_is_rejected() {
        let mut s = Scenario::new(RadarParams::desk(), 3);
        s.timeline.t_max = 1;
        let ev = |bin| TargetEvent {
            cpi_start: 0,
            cpi_end: 2,
            bin,
            snr_db_per_radar: vec![SnrCurve::Constant(0.0)],
        };
        s.timeline.events = vec![ev(1), ev(2)];
        assert!(s.validate().is_err());
        s.timeline.t_max = 5;
        assert!(s.validate().is_ok());
        s.timeline.events = vec![ev(1), ev(1)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn piecewise_linear_snr() {
        let c = SnrCurve::Knots(vec![(0, -30.0), (100, -10.0), (200, -30.0)]);
        assert_eq!(c.at(0), -30.0);
        assert_eq!(c.at(50), -20.0);
        assert_eq!(c.at(100), -10.0);
        assert_eq!(c.at(150), -20.0);
        assert_eq!(c.at(500), -30.0);
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = load_scenario("[radar]\nn_tx 4\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        assert!(load_scenario("[radar]\nn_tx = x\n").is_err());
        assert!(load_scenario("[bogus]\n").is_err());
    }

    #[test]
    fn knob_sections_round_trip() {
        let mut s = load_scenario(SCENARIO_1).unwrap();
        s.clutter.structure = Structure::Custom {
            p: 1,
            q: 2,
            phi: vec![Complex64::new(0.1, -0.2), Complex64::new(0.05, 0.0)],
        };
        s.clutter.innovation = Innovation::ComplexGaussian { sigma2: 2.5 };
        s.detector.lag_rule = LagRule::Capped { cap: 0.5 };
        s.agent.epsilon_decay_cpis = 100;
        s.metrics.exclude_adjacent = true;
        let back = load_scenario(&s.to_text()).unwrap();
        assert_eq!(back, s);
    }
}
