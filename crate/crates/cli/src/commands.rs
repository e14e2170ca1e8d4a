//! One function per subcommand, each returning a serializable record.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use prophetcomp::mc::{simulate_joint, McConfig, TieBreak};
use prophetcomp::{
    alg_value, beta_bounds, beta_finite_n, build_certificates, check_dual_feasibility,
    check_low_competition_shape, check_phi_argmax, check_primal_feasibility, check_quasiconcavity,
    check_weak_duality, competitive_ratio, opt_value, solve_discretized_lp, CheckReport, ComplexityQuery,
    ComplexityReport, DistributionSpec, Error, GridSpec, LpCrossCheck, Quantile, QuasiconcavityProfile,
    SelectionInstance, WeakDualityReport,
};

use crate::distspec;
use crate::output::{csv_num, csv_opt, sig4, Tabular};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or out-of-domain input: exit code 2.
    Usage(String),
    /// A verification check failed: exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Failed(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::InfiniteComplexity => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

fn instance(m: u64, n: u64, k: u64) -> Result<SelectionInstance, CliError> {
    Ok(SelectionInstance::new(m, n, k)?)
}

// ratio

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub instance: SelectionInstance,
    pub gamma: f64,
    pub optimal_quantile: f64,
    pub threshold_rule: String,
}

pub fn ratio(m: u64, n: u64, k: u64) -> Result<RatioRecord, CliError> {
    let inst = instance(m, n, k)?;
    let r = competitive_ratio::<f64>(&inst);
    Ok(RatioRecord {
        instance: inst,
        gamma: r.gamma,
        optimal_quantile: r.optimal_quantile,
        threshold_rule: format!(
            "accept, in arrival order, the first {k} of the {m} values that are at least F^-1(1 - {k}/{n})"
        ),
    })
}

impl Tabular for RatioRecord {
    fn columns() -> &'static [&'static str] {
        &["m", "n", "k", "gamma", "optimal_quantile"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let i = &self.instance;
        vec![vec![
            i.m().to_string(),
            i.n().to_string(),
            i.k().to_string(),
            csv_num(self.gamma),
            csv_num(self.optimal_quantile),
        ]]
    }

    fn text(&self) -> String {
        format!(
            "instance          {}\ngamma             {}\noptimal quantile  {}\nrule              {}\n",
            self.instance,
            sig4(self.gamma),
            sig4(self.optimal_quantile),
            self.threshold_rule
        )
    }
}

// complexity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComplexityRecord {
    Finite(ComplexityReport),
    /// `epsilon = 0`: no finite scaling reaches ratio one.
    Infinite {
        k: u64,
        epsilon: f64,
    },
}

pub fn complexity(
    k: u64,
    epsilon: f64,
    n: Option<u64>,
    n_grid: Vec<u64>,
) -> Result<ComplexityRecord, CliError> {
    let mut q = match ComplexityQuery::new(k, epsilon) {
        Ok(q) => q,
        Err(Error::InfiniteComplexity) if k >= 1 => return Ok(ComplexityRecord::Infinite { k, epsilon }),
        Err(e) => return Err(e.into()),
    };
    if let Some(n) = n {
        q = q.with_n(n)?;
    }
    if !n_grid.is_empty() {
        q = q.with_n_grid(n_grid)?;
    }
    Ok(ComplexityRecord::Finite(beta_bounds(&q)?))
}

impl Tabular for ComplexityRecord {
    fn columns() -> &'static [&'static str] {
        &[
            "k",
            "epsilon",
            "status",
            "lower",
            "upper",
            "closed_form_upper",
            "t_star",
            "psi_at_t_star",
            "poisson_estimate",
            "n",
            "m",
            "beta_n",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        match self {
            ComplexityRecord::Infinite { k, epsilon } => {
                let mut row = vec![k.to_string(), csv_num(*epsilon), "infinite".into()];
                row.extend(std::iter::repeat_n(String::new(), 9));
                vec![row]
            }
            ComplexityRecord::Finite(r) => {
                let head = vec![
                    r.k.to_string(),
                    csv_num(r.epsilon),
                    "finite".into(),
                    csv_num(r.lower),
                    csv_num(r.upper),
                    csv_opt(r.closed_form_upper),
                    csv_opt(r.t_star),
                    csv_opt(r.psi_at_t_star),
                    csv_num(r.poisson_estimate),
                ];
                let finite: Vec<_> = r.finite_n_value.iter().chain(r.n_grid_values.iter()).collect();
                if finite.is_empty() {
                    let mut row = head;
                    row.extend(std::iter::repeat_n(String::new(), 3));
                    return vec![row];
                }
                finite
                    .into_iter()
                    .map(|f| {
                        let mut row = head.clone();
                        row.extend([f.n.to_string(), f.m.to_string(), csv_num(f.ratio)]);
                        row
                    })
                    .collect()
            }
        }
    }

    fn text(&self) -> String {
        match self {
            ComplexityRecord::Infinite { k, .. } => {
                format!("k = {k}, epsilon = 0: competition complexity is infinite\n")
            }
            ComplexityRecord::Finite(r) => {
                let mut s = format!(
                    "k = {}, epsilon = {}\nlower bound       {}\nupper bound       {}\npoisson estimate  {}\n",
                    r.k,
                    r.epsilon,
                    sig4(r.lower),
                    sig4(r.upper),
                    sig4(r.poisson_estimate)
                );
                if let (Some(t), Some(p), Some(c)) = (r.t_star, r.psi_at_t_star, r.closed_form_upper) {
                    s.push_str(&format!(
                        "t*                {}\npsi(t*)           {}\nclosed-form upper {}\n",
                        sig4(t),
                        sig4(p),
                        sig4(c)
                    ));
                }
                for f in r.finite_n_value.iter().chain(r.n_grid_values.iter()) {
                    s.push_str(&format!(
                        "beta at n = {:<6} {} (m = {})\n",
                        f.n,
                        sig4(f.ratio),
                        f.m
                    ));
                }
                s
            }
        }
    }
}

// table1

/// Upper bounds on the optimal multi-threshold competitive ratio for
/// `k = 1..=5`, as published in prior work on the i.i.d. multiple-selection
/// prophet inequality. Compiled-in data; not recomputed here.
pub const TABLE1_UPPER_BOUNDS: [f64; 5] = [0.7474, 0.8372, 0.8742, 0.8949, 0.9086];
pub const TABLE1_SOURCE: &str =
    "upper bounds on the optimal multi-threshold algorithm for the i.i.d. k-selection prophet inequality (prior work)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub k: u64,
    pub upper_bound: f64,
    pub epsilon: f64,
    pub m: u64,
    pub beta: f64,
    /// `beta` to three decimals.
    pub beta_display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Record {
    pub n: u64,
    pub source: String,
    pub rows: Vec<Table1Row>,
}

pub fn table1(n: u64) -> Result<Table1Record, CliError> {
    let rows = TABLE1_UPPER_BOUNDS
        .iter()
        .enumerate()
        .map(|(i, &bound)| {
            let k = i as u64 + 1;
            let epsilon = 1.0 - bound;
            let b = beta_finite_n(k, n, epsilon)?;
            debug!("table1 k={k}: m={} beta={}", b.m, b.ratio);
            Ok(Table1Row {
                k,
                upper_bound: bound,
                epsilon,
                m: b.m,
                beta: b.ratio,
                beta_display: format!("{:.3}", b.ratio),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Table1Record {
        n,
        source: TABLE1_SOURCE.into(),
        rows,
    })
}

impl Tabular for Table1Record {
    fn columns() -> &'static [&'static str] {
        &["k", "upper_bound", "epsilon", "n", "m", "beta"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    csv_num(r.upper_bound),
                    csv_num(r.epsilon),
                    self.n.to_string(),
                    r.m.to_string(),
                    r.beta_display.clone(),
                ]
            })
            .collect()
    }

    fn text(&self) -> String {
        let mut s = String::from("k        ");
        for r in &self.rows {
            s.push_str(&format!("{:>8}", r.k));
        }
        s.push_str("\nbound    ");
        for r in &self.rows {
            s.push_str(&format!("{:>8}", sig4(r.upper_bound)));
        }
        s.push_str("\nbeta     ");
        for r in &self.rows {
            s.push_str(&format!("{:>8}", r.beta_display));
        }
        s.push_str(&format!("\n(n = {})\n", self.n));
        s
    }
}

// verify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRecord {
    #[serde(flatten)]
    pub solve: LpCrossCheck,
    pub gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub instance: SelectionInstance,
    pub grid_points: usize,
    pub primal: (f64, f64, f64),
    pub dual_value: f64,
    pub checks: Vec<CheckReport>,
    pub weak_duality: WeakDualityReport,
    pub lp: Option<LpRecord>,
    pub passed: bool,
}

impl VerifyRecord {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{} failed: residual {:e}, witness {:?}",
                    c.check, c.max_residual, c.witness
                )
            })
            .collect();
        if !self.weak_duality.passed {
            out.push(format!(
                "weak_duality failed: min gap {:e}",
                self.weak_duality.min_gap
            ));
        }
        if let Some(lp) = self.lp.as_ref().filter(|l| !l.passed) {
            out.push(format!(
                "discretized_lp failed: optimum {} above {}",
                lp.solve.optimum, lp.solve.certificate_value
            ));
        }
        out
    }
}

pub fn verify(
    m: u64,
    n: u64,
    k: u64,
    grid: usize,
    lp_cells: Option<usize>,
    weak_trials: usize,
    seed: u64,
) -> Result<VerifyRecord, CliError> {
    let inst = instance(m, n, k)?;
    let g = GridSpec::new(grid, &inst)?;
    let (p, d) = build_certificates::<f64>(&inst);
    info!("certificates for {inst}: A = {}, B = {}, d = {}", p.a, p.b, p.d);
    let mut checks = vec![
        check_primal_feasibility(&p, &inst, &g),
        check_dual_feasibility(&d, &inst, &g),
    ];
    if m >= k + 2 {
        let profile: QuasiconcavityProfile = check_quasiconcavity(&inst, &g)?;
        debug!("quasiconcavity: {} unresolved points", profile.unresolved);
        checks.push(profile.report);
    } else {
        checks.push(check_low_competition_shape(&inst, &g)?);
    }
    checks.push(check_phi_argmax(&inst, grid.max(2))?);
    let weak_duality = check_weak_duality(&inst, &g, weak_trials, seed)?;
    let lp = lp_cells
        .map(|cells| -> Result<LpRecord, CliError> {
            let solve = solve_discretized_lp::<f64>(&inst, cells)?;
            info!("discretized LP with {cells} cells: {} pivots", solve.pivots);
            let gap = solve.gap();
            // the certificate is representable on every grid, so the LP cannot exceed it
            let passed = solve.optimum <= solve.certificate_value * (1.0 + 1e-9);
            Ok(LpRecord { solve, gap, passed })
        })
        .transpose()?;
    let passed =
        checks.iter().all(|c| c.passed) && weak_duality.passed && lp.as_ref().is_none_or(|l| l.passed);
    Ok(VerifyRecord {
        instance: inst,
        grid_points: g.len(),
        primal: (p.a, p.b, p.d),
        dual_value: d.v,
        checks,
        weak_duality,
        lp,
        passed,
    })
}

impl Tabular for VerifyRecord {
    fn columns() -> &'static [&'static str] {
        &["m", "n", "k", "check", "max_residual", "passed", "witness"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let i = &self.instance;
        let base = || vec![i.m().to_string(), i.n().to_string(), i.k().to_string()];
        let mut rows: Vec<Vec<String>> = self
            .checks
            .iter()
            .map(|c| {
                let mut r = base();
                r.extend([
                    c.check.clone(),
                    csv_num(c.max_residual),
                    c.passed.to_string(),
                    csv_opt(c.witness),
                ]);
                r
            })
            .collect();
        let mut r = base();
        r.extend([
            "weak_duality".into(),
            csv_num((-self.weak_duality.min_gap).max(0.0)),
            self.weak_duality.passed.to_string(),
            String::new(),
        ]);
        rows.push(r);
        if let Some(lp) = &self.lp {
            let mut r = base();
            r.extend([
                "discretized_lp".into(),
                csv_num(lp.gap),
                lp.passed.to_string(),
                String::new(),
            ]);
            rows.push(r);
        }
        rows
    }

    fn text(&self) -> String {
        let mut s = format!(
            "instance {}  A = {}  B = {}  d = v = {}\n",
            self.instance,
            sig4(self.primal.0),
            sig4(self.primal.1),
            sig4(self.primal.2)
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<20} {}  residual {:.3e}\n",
                c.check,
                if c.passed { "pass" } else { "FAIL" },
                c.max_residual
            ));
        }
        s.push_str(&format!(
            "{:<20} {}  min gap {:.3e} over {} probes\n",
            "weak_duality",
            if self.weak_duality.passed { "pass" } else { "FAIL" },
            self.weak_duality.min_gap,
            self.weak_duality.trials
        ));
        if let Some(lp) = &self.lp {
            s.push_str(&format!(
                "{:<20} {}  {} cells, optimum {}, gap {:.3e}\n",
                "discretized_lp",
                if lp.passed { "pass" } else { "FAIL" },
                lp.solve.cells,
                sig4(lp.solve.optimum),
                lp.gap
            ));
        }
        s
    }
}

// simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub closed_form: f64,
    pub mc_mean: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub instance: SelectionInstance,
    pub distribution: DistributionSpec,
    pub q: f64,
    pub trials: u64,
    pub seed: u64,
    pub tie_break: TieBreak,
    pub alg: Comparison,
    pub opt: Comparison,
    pub ratio: Comparison,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum QuantileArg {
    Auto,
    Value(f64),
}

pub fn parse_quantile(s: &str) -> Result<QuantileArg, String> {
    if s == "auto" {
        return Ok(QuantileArg::Auto);
    }
    s.parse::<f64>()
        .map(QuantileArg::Value)
        .map_err(|_| format!("expected a number in [0, 1] or \"auto\", got {s:?}"))
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    dist: &str,
    m: u64,
    n: u64,
    k: u64,
    q: QuantileArg,
    trials: u64,
    seed: u64,
    tie_break: TieBreak,
) -> Result<SimulateRecord, CliError> {
    let inst = instance(m, n, k)?;
    let distribution =
        distspec::parse(dist, &inst).map_err(|e| CliError::Usage(format!("{e}\n{}", distspec::GRAMMAR)))?;
    let q = match q {
        QuantileArg::Auto => inst.critical_quantile::<f64>(),
        QuantileArg::Value(v) => v,
    };
    let alg_closed = alg_value(&distribution, m, k, Quantile::new(q)?)?;
    let opt_closed = opt_value(&distribution, n, k)?;
    let cfg = McConfig::new(trials, seed).with_tie_break(tie_break);
    let joint = simulate_joint(&distribution, &inst, &[q], &cfg)?;
    let (a, o, r) = (joint.alg[0], joint.opt, joint.ratio[0]);
    let ratio_closed = alg_closed / opt_closed;
    let z = |mean: f64, se: f64, reference: f64| {
        if mean == reference {
            0.0
        } else {
            (mean - reference) / se
        }
    };
    Ok(SimulateRecord {
        instance: inst,
        distribution,
        q,
        trials,
        seed,
        tie_break,
        alg: Comparison {
            closed_form: alg_closed,
            mc_mean: a.mean,
            stderr: a.stderr,
            z: a.z_score(alg_closed),
        },
        opt: Comparison {
            closed_form: opt_closed,
            mc_mean: o.mean,
            stderr: o.stderr,
            z: o.z_score(opt_closed),
        },
        ratio: Comparison {
            closed_form: ratio_closed,
            mc_mean: r.ratio,
            stderr: r.stderr,
            z: z(r.ratio, r.stderr, ratio_closed),
        },
        gamma: competitive_ratio::<f64>(&inst).gamma,
    })
}

impl Tabular for SimulateRecord {
    fn columns() -> &'static [&'static str] {
        &[
            "m",
            "n",
            "k",
            "q",
            "quantity",
            "closed_form",
            "mc_mean",
            "stderr",
            "z",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let i = &self.instance;
        [("alg", &self.alg), ("opt", &self.opt), ("ratio", &self.ratio)]
            .iter()
            .map(|(name, c)| {
                vec![
                    i.m().to_string(),
                    i.n().to_string(),
                    i.k().to_string(),
                    csv_num(self.q),
                    name.to_string(),
                    csv_num(c.closed_form),
                    csv_num(c.mc_mean),
                    csv_num(c.stderr),
                    csv_num(c.z),
                ]
            })
            .collect()
    }

    fn text(&self) -> String {
        let mut s = format!(
            "instance {}  q = {}  trials = {}\n",
            self.instance,
            sig4(self.q),
            self.trials
        );
        for (name, c) in [("ALG", &self.alg), ("OPT", &self.opt), ("ALG/OPT", &self.ratio)] {
            s.push_str(&format!(
                "{:<8} closed {:<10} mc {:<10} +- {:<10} z {:.2}\n",
                name,
                sig4(c.closed_form),
                sig4(c.mc_mean),
                sig4(c.stderr),
                c.z
            ));
        }
        s.push_str(&format!("gamma    {}\n", sig4(self.gamma)));
        s
    }
}
