//! `name:param1,param2[,param3]` distribution strings.

use prophetcomp::{DistributionSpec, PrimalCertificate, SelectionInstance};

pub const GRAMMAR: &str = "\
distribution grammar:
  uniform:LO,HI        uniform on [LO, HI], 0 <= LO <= HI
  exp:RATE             exponential with rate RATE > 0
  pareto:SHAPE,SCALE   Pareto with SHAPE > 1, SCALE > 0
  table:U/V,U/V,...    piecewise-linear f(u) = F^-1(1-u); first U = 0, last U = 1, V nonincreasing
  atomwc:A,B,P         mass P at B + A/P, rest at B
  atomwc:auto          atomwc with the certificate constants of the instance and P = 1e-3";

/// Resolution used by `atomwc:auto`.
pub const AUTO_ATOM_P: f64 = 1e-3;

pub fn parse(spec: &str, inst: &SelectionInstance) -> Result<DistributionSpec, String> {
    let (name, params) = spec
        .split_once(':')
        .ok_or_else(|| format!("missing ':' in distribution spec {spec:?}"))?;
    let nums = |want: usize| -> Result<Vec<f64>, String> {
        let v: Vec<f64> = params
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number {p:?} in {spec:?}"))
            })
            .collect::<Result<_, _>>()?;
        if v.len() != want {
            return Err(format!("{name} takes {want} parameter(s), got {}", v.len()));
        }
        Ok(v)
    };
    let built = match name {
        "uniform" => {
            let v = nums(2)?;
            DistributionSpec::uniform(v[0], v[1])
        }
        "exp" => DistributionSpec::exponential(nums(1)?[0]),
        "pareto" => {
            let v = nums(2)?;
            DistributionSpec::pareto(v[0], v[1])
        }
        "table" => {
            let knots = params
                .split(',')
                .map(|kv| {
                    let (u, v) = kv
                        .split_once('/')
                        .ok_or_else(|| format!("table knot {kv:?} is not U/V"))?;
                    let u = u.trim().parse::<f64>().map_err(|_| format!("bad number {u:?}"))?;
                    let v = v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}"))?;
                    Ok((u, v))
                })
                .collect::<Result<Vec<_>, String>>()?;
            DistributionSpec::quantile_table(knots)
        }
        "atomwc" if params.trim() == "auto" => {
            let c = PrimalCertificate::build(inst);
            DistributionSpec::atom_worst_case(c.a, c.b, AUTO_ATOM_P)
        }
        "atomwc" => {
            let v = nums(3)?;
            DistributionSpec::atom_worst_case(v[0], v[1], v[2])
        }
        other => return Err(format!("unknown distribution {other:?}")),
    };
    built.map_err(|e| e.to_string())
}
