//! Monte Carlo harness.
//!
//! Trial `i` of a cell runs on an instance seeded with `derive_seed(master, i)`; the
//! instance seed drives three independent ChaCha streams (placement, LRC draws,
//! forwarding). Trials are evaluated in parallel and aggregated in trial order, so
//! every result is a pure function of its inputs regardless of thread count.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{delivery_table, no_lrc_delivery_time};
use crate::error::{Error, Result};
use crate::geometry::{region_area_minus_ball, Rect};
use crate::network::{assign_lrcs, draw_lrc, place_nodes, NetworkInstance};
use crate::routing::{check_trajectory, hop_bound, route, RoutingOutcome, Violation};
use crate::{NetworkConfig, Point};

const STREAM_PLACEMENT: u64 = 0;
const STREAM_LRC: u64 = 1;
const STREAM_ROUTING: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under master seed `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the instance for `config.seed`: placement, then LRCs when enabled.
pub fn build_instance(config: &NetworkConfig, d: f64) -> Result<NetworkInstance<f64>> {
    let inst = place_nodes(config, d, &mut stream(config.seed, STREAM_PLACEMENT))?;
    Ok(assign_lrcs(inst, &mut stream(config.seed, STREAM_LRC)))
}

/// Builds and routes one instance. The config's seed identifies the trial.
pub fn run_trial(config: &NetworkConfig, d: f64) -> Result<(NetworkInstance<f64>, RoutingOutcome<f64>)> {
    let inst = build_instance(config, d)?;
    let outcome = route(&inst, &mut stream(config.seed, STREAM_ROUTING))?;
    Ok((inst, outcome))
}

/// What a trial leaves behind once its instance is dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub outcome: RoutingOutcome<f64>,
    pub violations: Vec<Violation>,
}

impl TrialRecord {
    pub fn tau(&self) -> Option<usize> {
        self.outcome.tau()
    }
}

/// Runs `trials` independent trials at separation `d`, in trial order.
pub fn run_trials(config: &NetworkConfig, d: f64, trials: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    config.check_separation(d)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = NetworkConfig { seed: derive_seed(config.seed, i), ..*config };
            let (inst, outcome) = run_trial(&cfg, d)?;
            let violations = check_trajectory(&inst, &outcome);
            Ok(TrialRecord { seed: cfg.seed, outcome, violations })
        })
        .collect()
}

/// Reference value for a cell: the continuum recursion with LRCs, the
/// `⌊d/r⌋ + 1` closed form without.
pub fn analytic_reference(config: &NetworkConfig, d: f64) -> Result<f64> {
    if config.lrc_enabled {
        delivery_table(config.side, config.range)?.g_of_d(d)
    } else {
        config.check_separation(d)?;
        Ok(no_lrc_delivery_time(d, config.range)? as f64)
    }
}

/// Aggregate statistics for one `(d, n)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub d: f64,
    pub d_over_r: f64,
    pub n: usize,
    pub trials: usize,
    /// Mean of `τ_n` over delivered trials; NaN when none was delivered.
    pub mean_delivered: f64,
    /// Mean of `τ_n · 1{τ_n < ∞}` over all trials.
    pub mean_indicator: f64,
    pub std_delivered: f64,
    pub fail_rate: f64,
    pub analytic_g: f64,
    pub abs_error: f64,
}

pub const SUMMARY_CSV_HEADER: &str =
    "d,d_over_r,n,trials,mean_delivered,mean_indicator,std_delivered,fail_rate,analytic_g,abs_error";

pub fn summarize(config: &NetworkConfig, d: f64, records: &[TrialRecord], analytic_g: f64) -> SummaryRow {
    let trials = records.len();
    let taus: Vec<f64> = records.iter().filter_map(|r| r.tau()).map(|t| t as f64).collect();
    let delivered = taus.len();
    let sum = taus.iter().fold(0.0, |acc, t| acc + t);
    let mean_delivered = if delivered > 0 { sum / delivered as f64 } else { f64::NAN };
    let std_delivered = if delivered > 1 {
        let ss: f64 = taus.iter().map(|t| (t - mean_delivered).powi(2)).sum();
        (ss / (delivered - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (mean_indicator, fail_rate) = if trials > 0 {
        (sum / trials as f64, (trials - delivered) as f64 / trials as f64)
    } else {
        (f64::NAN, f64::NAN)
    };
    SummaryRow {
        d,
        d_over_r: d / config.range,
        n: config.relays,
        trials,
        mean_delivered,
        mean_indicator,
        std_delivered,
        fail_rate,
        analytic_g,
        abs_error: (mean_delivered - analytic_g).abs(),
    }
}

/// Runs one cell and aggregates it against the analytic reference.
pub fn run_cell(config: &NetworkConfig, d: f64, trials: usize) -> Result<SummaryRow> {
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let analytic = analytic_reference(config, d)?;
    let records = run_trials(config, d, trials)?;
    Ok(summarize(config, d, &records, analytic))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.d_over_r,
            r.n,
            r.trials,
            r.mean_delivered,
            r.mean_indicator,
            r.std_delivered,
            r.fail_rate,
            r.analytic_g,
            r.abs_error
        );
    }
    out
}

/// Separation grid `start, start + step, ... <= stop`, in units of `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && start >= 0.0) {
            return Err(Error::param("d-grid", format!("need finite start >= 0, got {start}:{stop}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param("d-grid", format!("step must be > 0, got {step}")));
        }
        Ok(DGrid { start, stop, step })
    }

    /// Grid points in units of `r`. Points are `start + i·step`, not accumulated.
    pub fn points(&self) -> Vec<f64> {
        if self.stop < self.start {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub template: NetworkConfig,
    pub grid: DGrid,
    pub trials: usize,
    pub n_list: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub d: f64,
    pub d_over_r: f64,
    pub g: f64,
}

pub const ANALYTIC_GRID_CSV_HEADER: &str = "d,d_over_r,analytic_g";

pub fn analytic_grid_csv(points: &[AnalyticPoint]) -> String {
    let mut out = String::from(ANALYTIC_GRID_CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.d, p.d_over_r, p.g);
    }
    out
}

/// The continuum curve `g(d)` sampled on a grid. Needs no simulation, so it is
/// usable at any domain size.
pub fn analytic_curve_on_grid(side: f64, range: f64, grid: &DGrid) -> Result<Vec<AnalyticPoint>> {
    let curve = delivery_table(side, range)?;
    grid.points()
        .into_iter()
        .map(|x| {
            let d = x * range;
            Ok(AnalyticPoint { d, d_over_r: x, g: curve.g_of_d(d)? })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SummaryRow>,
    pub analytic: Vec<AnalyticPoint>,
}

/// One row per `(d, n)` cell (d-major), plus the analytic curve on the same grid.
pub fn sweep_separation(spec: &SweepSpec) -> Result<SweepResult> {
    let t = &spec.template;
    let analytic = analytic_curve_on_grid(t.side, t.range, &spec.grid)?;
    let mut rows = Vec::with_capacity(analytic.len() * spec.n_list.len());
    for point in &analytic {
        for &n in &spec.n_list {
            let cfg = NetworkConfig { relays: n, ..*t };
            rows.push(run_cell(&cfg, point.d, spec.trials)?);
        }
    }
    Ok(SweepResult { rows, analytic })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<SummaryRow>,
    /// Whether `abs_error` is non-increasing in `n`; only judged with 3+ sizes.
    pub non_increasing: Option<bool>,
}

/// One cell per relay count at fixed separation, to watch `E[τ_n 1{τ_n<∞}]`
/// approach the continuum value as `n` grows.
pub fn convergence_study(
    template: &NetworkConfig,
    d: f64,
    n_list: &[usize],
    trials: usize,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() {
        return Err(Error::param("n", "need at least one relay count"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("n", "relay counts must be strictly ascending"));
    }
    let rows = n_list
        .iter()
        .map(|&n| run_cell(&NetworkConfig { relays: n, ..*template }, d, trials))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let non_increasing = (rows.len() >= 3).then(|| is_non_increasing(&errors));
    Ok(ConvergenceReport { rows, non_increasing })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub d: f64,
    pub n: usize,
    pub trials: usize,
    /// `B = ⌊d/(r-δ)⌋ + 1`.
    pub bound: usize,
    /// Empirical `P{τ_n > B}`, failures included.
    pub p_exceed: f64,
    pub fail_rate: f64,
    /// Delivered trials longer than `B`; zero unless forwarding is broken.
    pub delivered_over_bound: usize,
}

pub const TAIL_CSV_HEADER: &str = "d,d_over_r,n,trials,B,p_exceed,fail_rate,delivered_over_B";

pub fn tail_from_records(config: &NetworkConfig, d: f64, records: &[TrialRecord]) -> TailReport {
    let bound = hop_bound(d, config.range, config.delta);
    let trials = records.len();
    let failures = records.iter().filter(|r| r.tau().is_none()).count();
    let delivered_over_bound = records.iter().filter(|r| r.tau().is_some_and(|t| t > bound)).count();
    TailReport {
        d,
        n: config.relays,
        trials,
        bound,
        p_exceed: (failures + delivered_over_bound) as f64 / trials as f64,
        fail_rate: failures as f64 / trials as f64,
        delivered_over_bound,
    }
}

pub fn tail_probability(config: &NetworkConfig, d: f64, trials: usize) -> Result<TailReport> {
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let records = run_trials(config, d, trials)?;
    Ok(tail_from_records(config, d, &records))
}

pub fn tail_csv(config: &NetworkConfig, reports: &[TailReport]) -> String {
    let mut out = String::from(TAIL_CSV_HEADER);
    out.push('\n');
    for t in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.d,
            t.d / config.range,
            t.n,
            t.trials,
            t.bound,
            t.p_exceed,
            t.fail_rate,
            t.delivered_over_bound
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCheck {
    pub region: Rect<f64>,
    pub observed: f64,
    pub predicted: f64,
    pub z: f64,
}

pub const REGION_CSV_HEADER: &str = "x0,y0,x1,y1,observed,predicted,z";

pub fn region_csv(checks: &[RegionCheck]) -> String {
    let mut out = String::from(REGION_CSV_HEADER);
    out.push('\n');
    for c in checks {
        let r = c.region;
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.x0, r.y0, r.x1, r.y1, c.observed, c.predicted, c.z);
    }
    out
}

/// Empirical law of a node's long-range contact versus the area ratio
/// `area(A - B(X_i, r)) / area(D - B(X_i, r))`.
///
/// Each draw places a fresh set of `config.relays` relays and draws the LRC of a node
/// fixed at `node`. Draws whose node has no candidate are skipped.
pub fn validate_lrc_distribution(
    config: &NetworkConfig,
    node: Point,
    regions: &[Rect<f64>],
    draws: usize,
) -> Result<Vec<RegionCheck>> {
    config.validate()?;
    let dom = config.domain();
    if !dom.contains(&node) {
        return Err(Error::param("node", "test node must lie inside the domain"));
    }
    if draws == 0 {
        return Err(Error::param("draws", "need at least one draw"));
    }
    let whole = region_area_minus_ball(&dom, &dom.as_rect(), node, config.range)?;
    let predicted = regions
        .iter()
        .map(|a| Ok(region_area_minus_ball(&dom, a, node, config.range)? / whole))
        .collect::<Result<Vec<f64>>>()?;

    let landings: Vec<Option<Point>> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i);
            let mut placement = stream(seed, STREAM_PLACEMENT);
            let relays: Vec<Point> =
                (0..config.relays).map(|_| crate::geometry::sample_uniform_domain(&mut placement, &dom)).collect();
            draw_lrc(&relays, &node, None, config.range, &mut stream(seed, STREAM_LRC)).map(|j| relays[j])
        })
        .collect();
    let landed: Vec<Point> = landings.into_iter().flatten().collect();
    let total = landed.len() as f64;

    Ok(regions
        .iter()
        .zip(predicted)
        .map(|(region, p)| {
            let hits = landed.iter().filter(|q| region.contains(q)).count() as f64;
            let observed = if total > 0.0 { hits / total } else { f64::NAN };
            RegionCheck { region: *region, observed, predicted: p, z: z_score(observed, p, total) }
        })
        .collect())
}

/// Binomial z-score of an observed fraction against `p` over `trials` draws.
pub fn z_score(observed: f64, p: f64, trials: f64) -> f64 {
    let var = p * (1.0 - p) / trials;
    if var > 0.0 {
        (observed - p) / var.sqrt()
    } else if (observed - p).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn is_non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, seed: u64) -> NetworkConfig {
        NetworkConfig::new(20.0, 1.0, n, seed).unwrap()
    }

    #[test]
    fn seeds_differ_per_trial() {
        let a: Vec<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn zero_separation_cell() {
        let row = run_cell(&cfg(300, 1), 0.0, 50).unwrap();
        assert_eq!(row.mean_delivered, 0.0);
        assert_eq!(row.fail_rate, 0.0);
        assert_eq!(row.analytic_g, 0.0);
    }

    #[test]
    fn all_failed_cell() {
        // one relay can't bridge 8r
        let row = run_cell(&cfg(1, 2), 8.0, 20).unwrap();
        assert_eq!(row.fail_rate, 1.0);
        assert!(row.mean_delivered.is_nan() && row.abs_error.is_nan());
        assert_eq!(row.mean_indicator.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn single_trial_is_reproducible() {
        let a = run_cell(&cfg(2000, 9), 4.5, 1).unwrap();
        let b = run_cell(&cfg(2000, 9), 4.5, 1).unwrap();
        assert_eq!(summary_csv(&[a]), summary_csv(&[b]));
    }

    #[test]
    fn two_band_cell_mean_is_two() {
        let c = cfg(20_000, 3);
        let row = run_cell(&c, 1.5, 200).unwrap();
        assert!(row.fail_rate < 1.0);
        assert_eq!(row.mean_delivered, 2.0);
        assert!((row.analytic_g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimator_identity() {
        let row = run_cell(&cfg(3000, 5), 5.0, 300).unwrap();
        assert!((row.mean_indicator - row.mean_delivered * (1.0 - row.fail_rate)).abs() < 1e-12);
        assert!(row.mean_indicator <= row.mean_delivered);
        assert!((0.0..=1.0).contains(&row.fail_rate));
        assert_eq!(row.abs_error, (row.mean_delivered - row.analytic_g).abs());
    }

    #[test]
    fn result_independent_of_thread_count() {
        let c = cfg(1500, 77);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_trials(&c, 6.0, 64)).unwrap();
        let b = four.install(|| run_trials(&c, 6.0, 64)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_lrc_reference_is_closed_form() {
        let mut c = cfg(100, 0);
        c.lrc_enabled = false;
        assert_eq!(analytic_reference(&c, 4.5).unwrap(), 5.0);
        assert!(analytic_reference(&c, 9.5).is_err());
    }

    #[test]
    fn grid_points() {
        assert_eq!(DGrid::new(0.0, 1.0, 0.25).unwrap().points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(DGrid::new(2.0, 1.0, 0.25).unwrap().points().is_empty());
        assert_eq!(DGrid::new(0.0, 0.3, 0.1).unwrap().points().len(), 4);
        assert!(DGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn empty_grid_gives_empty_sweep() {
        let spec = SweepSpec {
            template: cfg(100, 0),
            grid: DGrid::new(3.0, 2.0, 0.25).unwrap(),
            trials: 10,
            n_list: vec![100],
        };
        let out = sweep_separation(&spec).unwrap();
        assert!(out.rows.is_empty() && out.analytic.is_empty());
    }

    #[test]
    fn sweep_rows_are_d_major() {
        let spec = SweepSpec {
            template: cfg(100, 0),
            grid: DGrid::new(0.0, 1.0, 0.5).unwrap(),
            trials: 5,
            n_list: vec![100, 200],
        };
        let out = sweep_separation(&spec).unwrap();
        let keys: Vec<(f64, usize)> = out.rows.iter().map(|r| (r.d, r.n)).collect();
        assert_eq!(keys, vec![(0.0, 100), (0.0, 200), (0.5, 100), (0.5, 200), (1.0, 100), (1.0, 200)]);
        assert_eq!(out.analytic.len(), 3);
    }

    #[test]
    fn analytic_curve_102_shape() {
        let pts = analytic_curve_on_grid(102.0, 1.0, &DGrid::new(0.0, 50.0, 0.25).unwrap()).unwrap();
        assert_eq!(pts.len(), 201);
        assert!(pts.windows(2).all(|w| w[1].g >= w[0].g));
        let curve = delivery_table(102.0, 1.0).unwrap();
        assert!(curve.u()[50] < 1e-3);
        assert_eq!(pts.last().unwrap().g, curve.plateau());
    }

    #[test]
    fn convergence_single_size_has_no_trend() {
        let rep = convergence_study(&cfg(200, 0), 2.0, &[200], 5).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.non_increasing, None);
        assert!(convergence_study(&cfg(200, 0), 2.0, &[300, 200], 5).is_err());
    }

    #[test]
    fn no_lrc_convergence_matches_closed_form() {
        let mut c = cfg(40_000, 2);
        c.lrc_enabled = false;
        let rep = convergence_study(&c, 2.5, &[40_000], 100).unwrap();
        assert_eq!(rep.rows[0].mean_delivered, 3.0);
    }

    #[test]
    fn tail_at_zero_separation() {
        let t = tail_probability(&cfg(500, 0), 0.0, 20).unwrap();
        assert_eq!(t.bound, 1);
        assert_eq!(t.p_exceed, 0.0);
    }

    #[test]
    fn delivered_trials_respect_bound() {
        let c = cfg(2000, 4);
        let t = tail_probability(&c, 7.0, 200).unwrap();
        assert_eq!(t.delivered_over_bound, 0);
        assert!((t.p_exceed - t.fail_rate).abs() < 1e-15);
    }

    #[test]
    fn lrc_validation_trivial_regions() {
        let c = cfg(200, 1);
        let dom = c.domain();
        let centre = Point::new(10.0, 10.0);
        let inside_ball = Rect::new(9.7, 9.7, 10.3, 10.3).unwrap();
        let checks = validate_lrc_distribution(&c, centre, &[dom.as_rect(), inside_ball], 2000).unwrap();
        assert_eq!(checks[0].observed, 1.0);
        assert!((checks[0].predicted - 1.0).abs() < 1e-12);
        assert_eq!(checks[1].observed, 0.0);
        assert_eq!(checks[1].predicted, 0.0);
        assert_eq!(checks[1].z, 0.0);
    }

    #[test]
    fn median_and_trend_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert!(is_non_increasing(&[3.0, 3.0, 1.0]));
        assert!(!is_non_increasing(&[1.0, 2.0]));
    }

    #[test]
    fn z_score_edges() {
        assert_eq!(z_score(0.5, 0.5, 100.0), 0.0);
        assert!((z_score(0.6, 0.5, 100.0) - 2.0).abs() < 1e-12);
        assert_eq!(z_score(0.1, 0.0, 10.0), f64::INFINITY);
    }
}
