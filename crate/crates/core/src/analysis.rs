//! Depth recurrence of the long-range elimination, its bounds, and the
//! transmission model for coupled-chip designs.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::coupled::{coupled_depth, dense_generic_isometry};
use crate::error::{Error, Result};
use crate::linalg::Isometry;
use crate::par::Exec;

/// Label occupancy: `t[i]` rows carry label `i`, the last entry counts rows
/// that are already zero.
pub type TkArray = Vec<u64>;

/// One layer of pairwise elimination.
pub fn tk_step(t: &[u64]) -> TkArray {
    let n = t.len() - 1;
    let mut next = vec![0; n + 1];
    if n == 0 {
        next[0] = t[0];
        return next;
    }
    next[0] = t[0].div_ceil(2);
    for i in 1..n {
        next[i] = t[i].div_ceil(2) + t[i - 1] / 2;
    }
    next[n] = t[n] + t[n - 1] / 2;
    next
}

pub fn tk_initial(m: u64, n: usize) -> TkArray {
    let mut t = vec![0; n + 1];
    t[0] = m;
    t
}

pub fn tk_equilibrium(m: u64, n: usize) -> TkArray {
    let mut t = vec![1; n + 1];
    t[n] = m - n as u64;
    t
}

/// Steps until `[1, ..., 1, m - n]`, with every array on the way.
pub fn tk_simulate(m: usize, n: usize) -> (usize, Vec<TkArray>) {
    assert!(n >= 1 && m >= n, "need m >= n >= 1");
    let target = tk_equilibrium(m as u64, n);
    let mut trace = vec![tk_initial(m as u64, n)];
    while *trace.last().expect("nonempty") != target {
        let next = tk_step(trace.last().expect("nonempty"));
        trace.push(next);
    }
    (trace.len() - 1, trace)
}

/// Smallest `K` with `m * sum_{i<n} C(K, i) < 2^K`, scanning upward in exact
/// integers up to `64 n + 64 log2 m`.
pub fn depth_bound_inequality(m: usize, n: usize) -> Result<u64> {
    if n == 0 || m < n {
        return Err(Error::Dimension(format!("need m >= n >= 1, got m={m} n={n}")));
    }
    let cap = 64 * n as u64 + 64 * (usize::BITS - m.leading_zeros()) as u64;
    let m_big = BigUint::from(m);
    // row K of Pascal's triangle, first n entries
    let mut row: Vec<BigUint> = vec![BigUint::from(1u32)];
    for k in 0..=cap {
        let partial: BigUint = row.iter().take(n).sum();
        if &m_big * partial < BigUint::from(1u32) << k {
            return Ok(k);
        }
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(BigUint::from(1u32));
        for w in row.windows(2) {
            next.push(&w[0] + &w[1]);
        }
        next.push(BigUint::from(1u32));
        next.truncate(n + 1);
        row = next;
    }
    Err(Error::Numeric(format!("no K up to {cap} satisfies the inequality")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyticBound {
    pub k: u64,
    /// The closed form assumes `K > 2n`; false when the result violates it.
    pub regime_ok: bool,
}

/// `ceil(2n + 2L + 2 sqrt(nL + L^2))` with `L = ln(m/2)`.
pub fn depth_bound_analytic(m: usize, n: usize) -> Result<AnalyticBound> {
    if m < 3 {
        return Err(Error::Dimension(format!("analytic bound needs m >= 3, got {m}")));
    }
    let l = (m as f64 / 2.0).ln();
    let nf = n as f64;
    let k = (2.0 * nf + 2.0 * l + 2.0 * (nf * l + l * l).sqrt()).ceil() as u64;
    Ok(AnalyticBound {
        k,
        regime_ok: k > 2 * n as u64,
    })
}

fn binom_i(n: i64, k: i64) -> i128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Checks, in exact integer arithmetic, the closed formula for `T_k[i]`
/// (`i < n`) in terms of the parity arrays `S_l = T_l mod 2`, and the formula
/// for `sum_{i<n} T_k[i]`, for every `k <= k_max`.
pub fn lemma_identities_check(m: usize, n: usize, k_max: usize) -> bool {
    if n == 0 || m < n || k_max > 60 {
        return false;
    }
    let mut trace = vec![tk_initial(m as u64, n)];
    for _ in 0..k_max {
        let next = tk_step(trace.last().expect("nonempty"));
        trace.push(next);
    }
    let s: Vec<Vec<i128>> = trace.iter().map(|t| t.iter().map(|&x| (x % 2) as i128).collect()).collect();
    let m = m as i128;
    let (ni, ki) = (n as i64, k_max as i64);

    for k in 0..=ki {
        let scale = 1i128 << k;
        // T_k[i] * 2^k
        for i in 0..ni {
            let mut rhs = binom_i(k, i) * m;
            for l in 1..=k {
                let mut inner = 0;
                for j in 0..=l.min(i) {
                    inner += (binom_i(l - 1, j) - binom_i(l - 1, j - 1)) * s[(k - l) as usize][(i - j) as usize];
                }
                rhs += (1i128 << (k - l)) * inner;
            }
            if rhs != scale * trace[k as usize][i as usize] as i128 {
                return false;
            }
        }
        // sum_{i<n} T_k[i] * 2^k
        let lhs: i128 = (0..n).map(|i| trace[k as usize][i] as i128).sum::<i128>() * scale;
        let mut rhs = 0;
        for i in 0..ni {
            rhs += binom_i(k, i) * m;
            for l in i + 1..=k {
                rhs += (1i128 << (k - l)) * binom_i(l - 1, i) * s[(k - l) as usize][(ni - i - 1) as usize];
            }
        }
        if lhs != rhs {
            return false;
        }
    }
    true
}

/// Per-photon transmission `eta_mzi^(d k) * eta_c^(d + 1)` and its `n`-th
/// power.
pub fn transmission(eta_mzi: f64, eta_c: f64, d: usize, k: usize, n: usize) -> (f64, f64) {
    let eta = eta_mzi.powi((d * k) as i32) * eta_c.powi(d as i32 + 1);
    (eta, eta.powi(n as i32))
}

/// A single `m`-mode chip: depth `m` and two couplings.
pub fn single_chip_transmission(m: usize, eta_mzi: f64, eta_c: f64, n: usize) -> (f64, f64) {
    transmission(eta_mzi, eta_c, 1, m, n)
}

/// Memoized chip-stage counts `d(m, n, k)`, measured on one dense generic
/// instance per `(m, n)` drawn from a fixed seed.
///
/// Readers share the map; writes to the backing file go through a single
/// writer lock and replace the file atomically.
pub struct DepthCache {
    path: Option<PathBuf>,
    seed: u64,
    depths: RwLock<BTreeMap<String, usize>>,
    instances: Mutex<HashMap<(usize, usize), Arc<Isometry>>>,
    writer: Mutex<()>,
}

pub const DEPTH_SEED: u64 = 0;

fn key(m: usize, n: usize, k: usize) -> String {
    format!("{m},{n},{k}")
}

impl DepthCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            seed: DEPTH_SEED,
            depths: RwLock::new(BTreeMap::new()),
            instances: Mutex::new(HashMap::new()),
            writer: Mutex::new(()),
        }
    }

    /// Loads `path` if it exists; later [`save`](Self::save) calls write it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let depths = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::Parse(format!("{}: {e}", path.display()))),
        };
        Ok(Self {
            path: Some(path),
            depths: RwLock::new(depths),
            ..Self::in_memory()
        })
    }

    pub fn len(&self) -> usize {
        self.depths.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, m: usize, n: usize, k: usize) -> Option<usize> {
        self.depths.read().expect("cache lock").get(&key(m, n, k)).copied()
    }

    pub fn insert(&self, m: usize, n: usize, k: usize, d: usize) {
        self.depths.write().expect("cache lock").insert(key(m, n, k), d);
    }

    pub fn instance(&self, m: usize, n: usize) -> Result<Arc<Isometry>> {
        let mut map = self.instances.lock().expect("instance lock");
        if let Some(v) = map.get(&(m, n)) {
            return Ok(v.clone());
        }
        let (v, _) = dense_generic_isometry(m, n, self.seed)?;
        let v = Arc::new(v);
        map.insert((m, n), v.clone());
        Ok(v)
    }

    /// `d(m, n, k)`, measured on first use.
    pub fn depth(&self, m: usize, n: usize, k: usize) -> Result<usize> {
        if let Some(d) = self.get(m, n, k) {
            return Ok(d);
        }
        let v = self.instance(m, n)?;
        let d = coupled_depth(&v, k)?;
        self.insert(m, n, k, d);
        Ok(d)
    }

    /// Depths for several chip sizes, measured concurrently when allowed.
    pub fn depths(&self, m: usize, n: usize, ks: &[usize], exec: Exec) -> Result<Vec<usize>> {
        self.instance(m, n)?;
        exec.map(ks, |&k| self.depth(m, n, k)).into_iter().collect()
    }

    /// Writes the map as JSON (keys `"m,n,k"`). No-op for in-memory caches.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let _guard = self.writer.lock().expect("writer lock");
        let text = serde_json::to_string_pretty(&*self.depths.read().expect("cache lock"))
            .map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::Parse(format!("{}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    /// Largest chip size tried besides the single chip (default `m`).
    pub k_max: Option<usize>,
    pub stride: usize,
    pub exec: Exec,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            k_max: None,
            stride: 1,
            exec: Exec::default(),
        }
    }
}

impl ScanOptions {
    /// Chip sizes in increasing order; always ends with `m` (single chip).
    pub fn chip_sizes(&self, m: usize) -> Vec<usize> {
        let top = self.k_max.unwrap_or(m).min(m);
        let mut ks: Vec<usize> = (2..=top).step_by(self.stride.max(1)).collect();
        if ks.last() != Some(&m) {
            ks.push(m);
        }
        ks
    }

    fn chunk(&self) -> usize {
        if self.exec.is_parallel() {
            2 * std::thread::available_parallelism().map_or(1, |p| p.get())
        } else {
            1
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipChoice {
    pub k: usize,
    pub d: usize,
    pub eta: f64,
    pub eta_n: f64,
    /// `k = m`: one chip, no inter-chip couplings.
    pub single_chip: bool,
}

/// Chip size maximizing per-photon transmission; ties go to the larger chip.
///
/// Since `d >= 1`, chip size `k` can reach at most `eta_mzi^k eta_c^2`; the
/// scan stops once that drops strictly below the best value found.
pub fn optimal_chip_size(m: usize, n: usize, eta_mzi: f64, eta_c: f64, cache: &DepthCache, opts: &ScanOptions) -> Result<ChipChoice> {
    if m < 2 {
        return Err(Error::Dimension("chip scan needs at least 2 modes".into()));
    }
    let ks = opts.chip_sizes(m);
    let mut best: Option<ChipChoice> = None;
    for chunk in ks.chunks(opts.chunk()) {
        if let Some(b) = &best {
            let k0 = chunk[0];
            if eta_mzi.powi(k0 as i32) * eta_c * eta_c < b.eta {
                break;
            }
        }
        let ds = cache.depths(m, n, chunk, opts.exec)?;
        for (&k, &d) in chunk.iter().zip(&ds) {
            let (eta, eta_n) = transmission(eta_mzi, eta_c, d, k, n);
            if best.as_ref().is_none_or(|b| eta >= b.eta) {
                best = Some(ChipChoice {
                    k,
                    d,
                    eta,
                    eta_n,
                    single_chip: k == m,
                });
            }
        }
    }
    Ok(best.expect("at least one chip size"))
}

/// `(k, d(m, n, k))` for every scanned chip size.
pub fn depth_profile(m: usize, n: usize, cache: &DepthCache, opts: &ScanOptions) -> Result<Vec<(usize, usize)>> {
    let ks = opts.chip_sizes(m);
    let ds = cache.depths(m, n, &ks, opts.exec)?;
    Ok(ks.into_iter().zip(ds).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoPoint {
    pub eta_mzi: f64,
    /// Smallest coupling transmission reaching the target, if any.
    pub eta_c_required: Option<f64>,
    pub k_star: Option<usize>,
    /// Same for one `m`-mode chip.
    pub eta_c_single: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoCurve {
    pub points: Vec<IsoPoint>,
    /// Below this MZI transmission no coupling transmission reaches the
    /// target.
    pub cutoff_eta_mzi: f64,
}

fn required_coupling(target: f64, eta_mzi: f64, d: usize, k: usize) -> f64 {
    (target / eta_mzi.powi((d * k) as i32)).powf(1.0 / (d + 1) as f64)
}

/// Coupling transmission needed for `eta = target` along a grid of MZI
/// transmissions. At fixed `eta_mzi`, chip size `k` needs
/// `eta_c >= (target / eta_mzi^(d k))^(1 / (d + 1))`; the requirement is the
/// minimum over `k`.
pub fn iso_transmission_curve(m: usize, n: usize, target: f64, grid: &[f64], cache: &DepthCache, opts: &ScanOptions) -> Result<IsoCurve> {
    if !(0.0..1.0).contains(&target) || target == 0.0 {
        return Err(Error::Dimension(format!("target transmission {target} outside (0, 1)")));
    }
    let profile = depth_profile(m, n, cache, opts)?;
    let min_depth = profile.iter().map(|&(k, d)| d * k).min().expect("nonempty profile");
    let points = grid
        .iter()
        .map(|&eta_mzi| {
            let (mut best, mut k_star) = (f64::INFINITY, None);
            for &(k, d) in &profile {
                let r = required_coupling(target, eta_mzi, d, k);
                if r <= best {
                    best = r;
                    k_star = Some(k);
                }
            }
            let single = required_coupling(target, eta_mzi, 1, m);
            IsoPoint {
                eta_mzi,
                eta_c_required: (best <= 1.0).then_some(best),
                k_star: k_star.filter(|_| best <= 1.0),
                eta_c_single: (single <= 1.0).then_some(single),
            }
        })
        .collect();
    Ok(IsoCurve {
        points,
        cutoff_eta_mzi: target.powf(1.0 / min_depth as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub eta_mzi: f64,
    pub eta_c: f64,
    pub k_star: usize,
    pub eta_star: f64,
}

/// Optimal chip size over a grid, row-major in `(eta_mzi, eta_c)`.
pub fn heatmap(m: usize, n: usize, mzi_grid: &[f64], c_grid: &[f64], cache: &DepthCache, opts: &ScanOptions) -> Result<Vec<HeatmapRow>> {
    let mut rows = Vec::with_capacity(mzi_grid.len() * c_grid.len());
    for &eta_mzi in mzi_grid {
        for &eta_c in c_grid {
            let c = optimal_chip_size(m, n, eta_mzi, eta_c, cache, opts)?;
            rows.push(HeatmapRow {
                eta_mzi,
                eta_c,
                k_star: c.k,
                eta_star: c.eta,
            });
        }
    }
    Ok(rows)
}
