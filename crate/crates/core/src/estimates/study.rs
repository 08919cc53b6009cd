use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::integrals::*;
use super::{
    level_tracker, log_moser_constant, moser_iterate, EstimateError, Exponents, LevelState,
    MoserRun,
};
use crate::solver::{solve, SolveConfig};
use crate::torus::{HarmonicSum, ScalarField, SpectralGrid, TorusError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySettings {
    pub q: f64,
    pub p0: f64,
    /// Exponents at which the Cherrier, Sobolev and level constants are fitted.
    pub sweep: Vec<f64>,
    /// Factor applied to every fitted maximum.
    pub safety: f64,
    pub moser_cap: f64,
    pub moser_stabilization: f64,
    pub stokes_exponents: Vec<f64>,
    pub stokes_tol: f64,
    pub held_out: usize,
    pub shape_terms: usize,
    pub shape_max_frequency: i32,
    pub seed: u64,
    /// Common `||A e^F||_{L^q}`; the calibration data's own value when unset.
    pub lq_target: Option<f64>,
    pub scales: Vec<f64>,
    pub refine: bool,
    pub stability_tol: f64,
    pub solve: SolveConfig,
}

impl StudySettings {
    pub fn new(n: usize) -> Self {
        Self {
            q: 4.0 * n as f64,
            p0: 4.0,
            sweep: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            safety: 2.0,
            moser_cap: 1024.0,
            moser_stabilization: 1e-6,
            stokes_exponents: vec![2.0, 8.0, 20.0],
            stokes_tol: 1e-7,
            held_out: 5,
            shape_terms: 4,
            shape_max_frequency: 2,
            seed: 0,
            lq_target: None,
            scales: vec![0.5, 1.0, 2.0],
            refine: true,
            stability_tol: 0.1,
            solve: SolveConfig::default(),
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        let bad = |m: &str| Err(EstimateError::InvalidSettings(m.into()));
        if self.sweep.is_empty() || self.sweep.iter().any(|&p| !(p > 0.0)) {
            return bad("sweep exponents must be positive");
        }
        if !(self.safety >= 1.0) {
            return bad("safety factor must be at least 1");
        }
        if self.stokes_exponents.iter().any(|&p| !(p > 0.0)) {
            return bad("Stokes exponents must be positive");
        }
        if !(self.moser_cap > self.p0) || !(self.moser_stabilization > 0.0) {
            return bad("Moser cap must exceed p0 and stabilization must be positive");
        }
        if self.shape_terms == 0 || self.shape_max_frequency < 1 {
            return bad("random shapes need at least one term and frequency");
        }
        if self.scales.iter().any(|&s| !s.is_finite()) {
            return bad("non-finite scale");
        }
        Ok(())
    }
}

/// `||A e^F||_{L^q}` with `A` normalizing `integral A e^F` to the volume.
pub fn lq_class_norm(f: &ScalarField, q: f64) -> f64 {
    let top = f.max();
    let log_mean = top + f.map(|v| (v - top).exp()).mean().ln();
    let shifted = f.map(|v| (q * (v - top)).exp()).integrate();
    ((top - log_mean) + shifted.ln() / q).exp()
}

/// Right-hand side data of a study: harmonics, or samples that are
/// interpolated onto finer grids.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Harmonics(HarmonicSum),
    Field(ScalarField),
}

#[derive(Serialize)]
enum ForcingSummary<'a> {
    #[serde(rename = "harmonics")]
    Harmonics(&'a HarmonicSum),
    #[serde(rename = "field")]
    Field {
        points: usize,
        active: Vec<usize>,
        sup_norm: f64,
    },
}

impl Serialize for Forcing {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Forcing::Harmonics(h) => ForcingSummary::Harmonics(h),
            Forcing::Field(f) => ForcingSummary::Field {
                points: f.grid().points(),
                active: f.grid().active().iter().map(|c| c + 1).collect(),
                sup_norm: f.sup_norm(),
            },
        }
        .serialize(s)
    }
}

impl Forcing {
    pub fn sample(&self, grid: &SpectralGrid) -> Result<ScalarField, TorusError> {
        match self {
            Forcing::Harmonics(h) => {
                h.check(grid)?;
                Ok(h.sample(grid))
            }
            Forcing::Field(f) => f.resample(grid),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Forcing::Harmonics(h) => Forcing::Harmonics(h.scaled(s)),
            Forcing::Field(f) => Forcing::Field(f.scale(s)),
        }
    }
}

/// Rescales `shape` so that its `L^q` class norm equals `target`; the norm
/// grows with the amplitude.
pub fn match_lq_class(
    shape: &Forcing,
    grid: &SpectralGrid,
    q: f64,
    target: f64,
) -> Result<Forcing, EstimateError> {
    let base = shape.sample(grid)?;
    let norm = |s: f64| lq_class_norm(&base.scale(s), q);
    let floor = grid.volume().powf(1.0 / q);
    if !(target >= floor) {
        return Err(EstimateError::ClassMatch(format!(
            "target {target} below the flat value {floor}"
        )));
    }
    if norm(1.0) <= floor * (1.0 + 1e-14) {
        return Err(EstimateError::ClassMatch("shape is constant".into()));
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while norm(hi) < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(EstimateError::ClassMatch("target not reached".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(shape.scaled(0.5 * (lo + hi)))
}

/// Constants fitted on the calibration potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedConstants {
    pub cherrier: f64,
    pub sobolev: f64,
    pub levels: Vec<LevelState>,
    /// `C` in `||e^{-phi}||_{L^{p gamma}} <= (p C)^{1/p} ||e^{-phi}||_{L^{pr}}`.
    pub recursion: f64,
    pub log_moser: f64,
    /// `C` in `e^{-s0 inf phi} <= e^C integral e^{-s0 phi}`.
    pub integrability: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C3 / C2 + C1`.
    pub bound: f64,
}

impl FittedConstants {
    pub fn fit(
        phi: &ScalarField,
        terms: &ChainTerms,
        exps: &Exponents,
        settings: &StudySettings,
    ) -> Self {
        let k = settings.safety;
        let sweep = &settings.sweep;
        let max_over = |f: &dyn Fn(f64) -> f64| sweep.iter().map(|&p| f(p)).fold(0.0, f64::max);
        let cherrier = k * max_over(&|p| cherrier_ratio(phi, p, exps.q));
        let sobolev = k * max_over(&|p| sobolev_ratio(phi, p, exps.gamma));
        let levels = level_tracker(phi, terms, exps, sweep, k);
        let vol = phi.grid().volume();
        let recursion = sobolev * (4.0 * cherrier + vol.powf(1.0 / exps.q) / exps.p0);
        let log_moser = log_moser_constant(exps, recursion);
        let integrability = exps.s0 * log_moser;
        let c1 = (integrability + (2.0 * vol).ln()) / exps.s0;
        let c2 = (-integrability).exp() / 2.0;
        let c3 = k * phi.map(f64::abs).integrate();
        Self {
            cherrier,
            sobolev,
            levels,
            recursion,
            log_moser,
            integrability,
            c1,
            c2,
            c3,
            bound: c3 / c2 + c1,
        }
    }

    fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("cherrier".to_string(), self.cherrier),
            ("sobolev".to_string(), self.sobolev),
        ];
        out.extend(
            self.levels
                .iter()
                .map(|l| (format!("level_{}", l.level), l.constant)),
        );
        out.extend([
            ("recursion".to_string(), self.recursion),
            ("integrability".to_string(), self.integrability),
            ("c1".to_string(), self.c1),
            ("c2".to_string(), self.c2),
            ("c3".to_string(), self.c3),
            ("bound".to_string(), self.bound),
        ]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelCheck {
    pub level: usize,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceEstimates {
    pub index: usize,
    pub calibration: bool,
    pub lq_norm: f64,
    pub solve_residual: f64,
    pub min_eigenvalue: f64,
    /// `||phi||_{L^inf} = -inf phi`, as `max phi = 0`.
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub cherrier: Vec<(f64, f64)>,
    pub sobolev: Vec<(f64, f64)>,
    pub levels: Vec<LevelCheck>,
    pub moser: MoserRun,
    pub integrability: (f64, f64),
    /// `(C1, measure of {phi <= inf phi + C1})`.
    pub sublevel: (f64, f64),
    pub unit_sublevel_measure: f64,
    pub stokes: Vec<StokesChain>,
    pub holder_excess: f64,
    pub shift_discrepancy: f64,
    pub flags: InstanceFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceFlags {
    pub cherrier: bool,
    pub sobolev: bool,
    pub levels: bool,
    pub moser: bool,
    pub integrability: bool,
    pub sublevel: bool,
    pub l1: bool,
    pub sup_bound: bool,
    pub stokes: bool,
    pub holder: bool,
    pub shift: bool,
}

impl InstanceFlags {
    pub fn all(&self) -> bool {
        self.cherrier
            && self.sobolev
            && self.levels
            && self.moser
            && self.integrability
            && self.sublevel
            && self.l1
            && self.sup_bound
            && self.stokes
            && self.holder
            && self.shift
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub scale: f64,
    pub lq_norm: f64,
    pub sup_norm: f64,
    pub l1_norm: f64,
    pub integrability: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateFlags {
    pub instances: bool,
    pub stability: bool,
    pub scaling: bool,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub points: usize,
    /// 1-based.
    pub active: Vec<usize>,
    pub volume: f64,
    pub exponents: Exponents,
    pub lq_target: f64,
    pub calibration: Forcing,
    pub held_out: Vec<Forcing>,
    pub constants: FittedConstants,
    pub refined_constants: Option<FittedConstants>,
    pub stability: Vec<StabilityRow>,
    pub instances: Vec<InstanceEstimates>,
    pub scaling: Vec<ScalingRow>,
    pub max_sup_norm: f64,
    pub max_l1_norm: f64,
    pub min_sublevel_measure: f64,
    pub flags: EstimateFlags,
    pub pass: bool,
}

fn solve_all(
    fs: &[ScalarField],
    cfg: &SolveConfig,
    offset: usize,
) -> Result<Vec<crate::solver::SolveReport>, EstimateError> {
    fs.par_iter()
        .enumerate()
        .map(|(i, f)| {
            solve(f, cfg).map_err(|source| EstimateError::Solve {
                index: offset + i,
                source,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    index: usize,
    calibration: bool,
    f: &ScalarField,
    report: &crate::solver::SolveReport,
    exps: &Exponents,
    constants: &FittedConstants,
    settings: &StudySettings,
    terms: &ChainTerms,
) -> InstanceEstimates {
    let phi = &report.phi;
    let cherrier: Vec<(f64, f64)> = settings
        .sweep
        .iter()
        .map(|&p| (p, cherrier_ratio(phi, p, exps.q)))
        .collect();
    let sobolev: Vec<(f64, f64)> = settings
        .sweep
        .iter()
        .map(|&p| (p, sobolev_ratio(phi, p, exps.gamma)))
        .collect();
    let mut levels = Vec::new();
    for state in &constants.levels {
        for &p in &settings.sweep {
            let (lhs, rhs) = level_inequality(
                phi,
                terms,
                p,
                exps.r,
                state.eps,
                state.level,
                state.constant,
            );
            levels.push(LevelCheck {
                level: state.level,
                p,
                lhs,
                rhs,
            });
        }
    }
    let moser = moser_iterate(
        phi,
        exps,
        constants.recursion,
        settings.moser_cap,
        settings.moser_stabilization,
    );
    let integrability = integrability_check(phi, exps.s0, constants.integrability);
    let sublevel = (constants.c1, sublevel_measure(phi, constants.c1));
    let stokes: Vec<StokesChain> = settings
        .stokes_exponents
        .iter()
        .map(|&p| stokes_chain(phi, terms, p))
        .collect();
    let sup_norm = -phi.min();
    let l1_norm = phi.map(f64::abs).integrate();
    let holder_ps: Vec<f64> = (1..=20)
        .map(|k| k as f64)
        .chain(settings.sweep.iter().copied())
        .collect();
    let holder = holder_excess(phi, &holder_ps, exps.r);
    let shift = shift_discrepancy(phi, &[0.5, 1.0, 2.0, 5.0, 10.0]);
    let flags = InstanceFlags {
        cherrier: cherrier.iter().all(|&(_, c)| c <= constants.cherrier),
        sobolev: sobolev.iter().all(|&(_, c)| c <= constants.sobolev),
        levels: levels.iter().all(|l| l.lhs <= l.rhs),
        moser: moser.pass && moser.monotone,
        integrability: integrability.0 <= integrability.1,
        sublevel: sublevel.1 >= constants.c2,
        l1: l1_norm <= constants.c3,
        sup_bound: sup_norm <= constants.bound,
        stokes: stokes.iter().all(|s| s.relative <= settings.stokes_tol),
        holder: holder <= 1e-12,
        shift: shift <= 1e-10,
    };
    InstanceEstimates {
        index,
        calibration,
        lq_norm: lq_class_norm(f, exps.q),
        solve_residual: report.residual,
        min_eigenvalue: report.min_eigenvalue,
        sup_norm,
        l1_norm,
        cherrier,
        sobolev,
        levels,
        moser,
        integrability,
        sublevel,
        unit_sublevel_measure: sublevel_measure(phi, 1.0),
        stokes,
        holder_excess: holder,
        shift_discrepancy: shift,
        flags,
    }
}

/// Solves the calibration problem and `held_out` random shapes of the same
/// `L^q` class, fits the constants on the first and checks every inequality
/// on all of them.
pub fn sup_bound_study(
    grid: &SpectralGrid,
    calibration: &Forcing,
    settings: &StudySettings,
) -> Result<EstimateReport, EstimateError> {
    settings.validate()?;
    settings
        .solve
        .validate()
        .map_err(|source| EstimateError::Solve { index: 0, source })?;
    let exps = Exponents::new(grid.n(), settings.q, settings.p0)?;
    let target = match settings.lq_target {
        Some(t) => t,
        None => lq_class_norm(&calibration.sample(grid)?, exps.q),
    };
    let calibration = match settings.lq_target {
        Some(t) => match_lq_class(calibration, grid, exps.q, t)?,
        None => calibration.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let held_out = (0..settings.held_out)
        .map(|_| {
            let shape = HarmonicSum::random(
                grid.active(),
                &mut rng,
                settings.shape_terms,
                settings.shape_max_frequency,
            );
            match_lq_class(&Forcing::Harmonics(shape), grid, exps.q, target)
        })
        .collect::<Result<Vec<_>, EstimateError>>()?;

    let data = std::iter::once(&calibration)
        .chain(&held_out)
        .map(|h| h.sample(grid))
        .collect::<Result<Vec<_>, TorusError>>()?;
    let solved = solve_all(&data, &settings.solve, 0)?;
    let terms: Vec<ChainTerms> = solved.iter().map(|s| ChainTerms::new(&s.phi)).collect();
    let constants = FittedConstants::fit(&solved[0].phi, &terms[0], &exps, settings);
    let instances: Vec<InstanceEstimates> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            evaluate(
                i,
                i == 0,
                &data[i],
                &solved[i],
                &exps,
                &constants,
                settings,
                &terms[i],
            )
        })
        .collect();

    let (refined_constants, stability) = if settings.refine {
        let fine_grid = grid.refined()?;
        let f = calibration.sample(&fine_grid)?;
        let report = solve(&f, &settings.solve)
            .map_err(|source| EstimateError::Solve { index: 0, source })?;
        let fine =
            FittedConstants::fit(&report.phi, &ChainTerms::new(&report.phi), &exps, settings);
        let rows = constants
            .named()
            .into_iter()
            .zip(fine.named())
            .map(|((name, coarse), (_, fine))| {
                let scale = coarse.abs().max(fine.abs());
                let relative_change = if scale == 0.0 {
                    0.0
                } else {
                    (coarse - fine).abs() / scale
                };
                StabilityRow {
                    name,
                    coarse,
                    fine,
                    relative_change,
                }
            })
            .collect();
        (Some(fine), rows)
    } else {
        (None, Vec::new())
    };

    let scaled = settings
        .scales
        .iter()
        .map(|&s| calibration.scaled(s).sample(grid))
        .collect::<Result<Vec<_>, TorusError>>()?;
    let scaled_solved = solve_all(&scaled, &settings.solve, data.len())?;
    let scaling: Vec<ScalingRow> = settings
        .scales
        .iter()
        .zip(&scaled)
        .zip(&scaled_solved)
        .map(|((&scale, f), rep)| {
            let integrability = integrability_check(&rep.phi, exps.s0, constants.integrability);
            ScalingRow {
                scale,
                lq_norm: lq_class_norm(f, exps.q),
                sup_norm: -rep.phi.min(),
                l1_norm: rep.phi.map(f64::abs).integrate(),
                integrability,
                pass: integrability.0 <= integrability.1,
            }
        })
        .collect();

    let max_sup_norm = instances.iter().map(|i| i.sup_norm).fold(0.0, f64::max);
    let max_l1_norm = instances.iter().map(|i| i.l1_norm).fold(0.0, f64::max);
    let min_sublevel_measure = instances
        .iter()
        .map(|i| i.sublevel.1)
        .fold(f64::INFINITY, f64::min);
    let finite = constants.named().iter().all(|(_, v)| v.is_finite())
        && instances.iter().all(|i| {
            i.sup_norm.is_finite() && i.l1_norm.is_finite() && i.integrability.1.is_finite()
        });
    let flags = EstimateFlags {
        instances: instances.iter().all(|i| i.flags.all()),
        stability: stability
            .iter()
            .all(|r| r.relative_change < settings.stability_tol),
        scaling: scaling.iter().all(|r| r.pass),
        finite,
    };
    let pass = flags.instances && flags.stability && flags.scaling && flags.finite;
    Ok(EstimateReport {
        n: grid.n(),
        points: grid.points(),
        active: grid.active().iter().map(|c| c + 1).collect(),
        volume: grid.volume(),
        exponents: exps,
        lq_target: target,
        calibration,
        held_out,
        constants,
        refined_constants,
        stability,
        instances,
        scaling,
        max_sup_norm,
        max_l1_norm,
        min_sublevel_measure,
        flags,
        pass,
    })
}

/// Columns `instance,p,ratio`.
pub fn write_cherrier_csv(w: &mut impl Write, report: &EstimateReport) -> Result<(), TorusError> {
    writeln!(w, "instance,p,ratio")?;
    for inst in &report.instances {
        for (p, ratio) in &inst.cherrier {
            writeln!(w, "{},{},{}", inst.index, p, ratio)?;
        }
    }
    Ok(())
}

/// Columns `instance,k,p,log_norm,log_normalized_norm`.
pub fn write_moser_csv(w: &mut impl Write, report: &EstimateReport) -> Result<(), TorusError> {
    writeln!(w, "instance,k,p,log_norm,log_normalized_norm")?;
    for inst in &report.instances {
        let m = &inst.moser;
        for (k, p) in m.exponents.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                inst.index, k, p, m.log_norms[k], m.log_normalized_norms[k]
            )?;
        }
    }
    Ok(())
}

/// Columns `scale,lq_norm,sup_norm,l1_norm`.
pub fn write_scaling_csv(w: &mut impl Write, report: &EstimateReport) -> Result<(), TorusError> {
    writeln!(w, "scale,lq_norm,sup_norm,l1_norm")?;
    for row in &report.scaling {
        writeln!(
            w,
            "{},{},{},{}",
            row.scale, row.lq_norm, row.sup_norm, row.l1_norm
        )?;
    }
    Ok(())
}
