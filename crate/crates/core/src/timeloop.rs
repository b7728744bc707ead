//! BDF2 semi-implicit time stepping with a single backward-Euler startup step.
//!
//! Each step solves one linear saddle point problem: convection and the
//! penalty coefficient are evaluated at the extrapolated field
//! `w = 2 u^{n-1} - u^{n-2}` (at `u^0` for the startup step).

use std::time::Instant;

use crate::analysis::{div_norm, energy_functional, error_parts_omega};
use crate::assembly::{assemble_convection, assemble_rhs, penalty_coefficient, Discretization, SparseSystem, StokesBlocks};
use crate::error::Error;
use crate::geometry::{Disk, DEFAULT_CUT_DEPTH, MAX_CUT_DEPTH};
use crate::linsolve::{condition_estimate_with, DirectSolver, SolveError, DEFAULT_TOLERANCE};
use crate::manufactured::{exact_velocity, exact_velocity_gradient, forcing};

/// Power iterations used for the condition estimate of the final system.
pub const CONDITION_ITERATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forcing {
    /// The forcing of the manufactured rotating flow.
    Manufactured,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Background cells per side.
    pub n: usize,
    pub dt: f64,
    pub final_time: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub mu: f64,
    pub delta_reg: f64,
    pub cut_depth: usize,
    pub solver_tol: f64,
    pub forcing: Forcing,
    /// Estimate the condition number of the last system solved.
    pub estimate_condition: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 20,
            dt: 0.05,
            final_time: 1.0,
            epsilon: 1e-3,
            beta: 0.0,
            mu: 1.0,
            delta_reg: 1e-9,
            cut_depth: DEFAULT_CUT_DEPTH,
            solver_tol: DEFAULT_TOLERANCE,
            forcing: Forcing::Manufactured,
            estimate_condition: true,
        }
    }
}

impl RunConfig {
    /// Resolution and step of the finer reference configuration.
    pub fn fine_preset() -> Self {
        Self { n: 160, dt: 0.025, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad(format!("T must be positive, got {}", self.final_time));
        }
        let ratio = self.final_time / self.dt;
        if (ratio - ratio.round()).abs() > 1e-12 * ratio.max(1.0) {
            return bad(format!("T = {} is not an integer multiple of dt = {}", self.final_time, self.dt));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return bad(format!("beta must satisfy 0 <= beta < 1, got {}", self.beta));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.delta_reg >= 0.0 && self.delta_reg.is_finite()) {
            return bad(format!("delta_reg must be nonnegative, got {}", self.delta_reg));
        }
        if self.cut_depth > MAX_CUT_DEPTH {
            return bad(format!("cut_depth {} exceeds {MAX_CUT_DEPTH}", self.cut_depth));
        }
        if !(self.solver_tol > 0.0) {
            return bad(format!("solver_tol must be positive, got {}", self.solver_tol));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.final_time / self.dt).round() as usize
    }

    /// Background mesh size `2 sqrt(2) / n`.
    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 / self.n as f64
    }
}

/// Velocity history and the latest pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// `u^n`.
    pub current: Vec<f64>,
    /// `u^{n-1}`; equals `current` before the first step.
    pub previous: Vec<f64>,
    /// `u^{n-2}`.
    pub older: Vec<f64>,
    pub pressure: Vec<f64>,
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub penalty: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    SolverFailed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::SolverFailed => "solver_failed",
        }
    }
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub beta: f64,
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub mu: f64,
    pub err_l2_final: f64,
    pub err_l2h1: f64,
    pub max_div: f64,
    pub max_energy: f64,
    pub cond_estimate: Option<f64>,
    pub wall_seconds: f64,
    pub status: RunStatus,
}

/// Quantities accumulated along a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryStats {
    pub steps_taken: usize,
    pub err_l2_final: f64,
    /// Running `sum dt ||e^n||^2_{H1(Omega)}`.
    pub err_l2h1_sq: f64,
    pub max_div: f64,
    pub max_energy: f64,
    /// `max_n ||u^n||_{L2(D)}`.
    pub max_l2_box: f64,
    pub min_penalty: f64,
    pub max_residual: f64,
    pub cond_estimate: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub stats: TrajectoryStats,
    pub record: SweepRecord,
    pub final_state: FieldState,
    pub failure: Option<SolveError>,
}

/// Discretization, constant blocks and solver state of one configuration.
pub struct Simulation {
    pub config: RunConfig,
    pub disc: Discretization<f64, Disk<f64>>,
    pub blocks: StokesBlocks<f64>,
    solver: DirectSolver,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self, Error> {
        config.validate()?;
        let disc = Discretization::new(config.n, Disk::default(), config.cut_depth)?;
        Ok(Self::from_discretization(config, disc))
    }

    pub fn from_discretization(config: RunConfig, disc: Discretization<f64, Disk<f64>>) -> Self {
        let blocks = StokesBlocks::new(&disc);
        let solver = DirectSolver::new(config.solver_tol);
        Self { config, disc, blocks, solver }
    }

    /// Interpolant of the exact velocity at `t = 0` with zero boundary values.
    pub fn initialize(&self) -> FieldState {
        let mut u0 = self.disc.velocity.interpolate(|p| exact_velocity(0.0, p));
        self.disc.velocity.apply_boundary_mask(&mut u0);
        self.state_from(u0)
    }

    /// Level-zero state from an arbitrary velocity.
    pub fn state_from(&self, u0: Vec<f64>) -> FieldState {
        FieldState {
            previous: u0.clone(),
            older: u0.clone(),
            current: u0,
            pressure: vec![0.0; self.blocks.n_pressure()],
            step: 0,
            t: 0.0,
        }
    }

    fn load(&self, t: f64) -> Vec<f64> {
        match self.config.forcing {
            Forcing::Manufactured => assemble_rhs(&self.disc, |p| forcing(t, p, self.config.mu)),
            Forcing::Zero => vec![0.0; self.blocks.n_velocity()],
        }
    }

    fn system_with(&self, mass_coeff: f64, w: &[f64], history: &[f64], t: f64) -> (SparseSystem<f64>, f64) {
        let c = &self.config;
        let sigma = penalty_coefficient(w, c.epsilon, c.beta, c.delta_reg, &self.blocks.penalty_mass);
        let conv = assemble_convection(&self.disc.velocity, w);
        let a = self.blocks.velocity_block(mass_coeff, c.mu, Some(&conv), sigma);
        let mut load = self.load(t);
        for (l, m) in load.iter_mut().zip(self.blocks.mass.mul_vec(history)) {
            *l += m;
        }
        (self.blocks.system(&a, &load), sigma)
    }

    /// System of the startup step from a level-zero state.
    pub fn system_bdf1(&self, state: &FieldState) -> (SparseSystem<f64>, f64) {
        let dt = self.config.dt;
        let history: Vec<f64> = state.current.iter().map(|u| u / dt).collect();
        self.system_with(1.0 / dt, &state.current, &history, dt)
    }

    /// System of the BDF2 step producing level `state.step + 1`.
    pub fn system_bdf2(&self, state: &FieldState) -> (SparseSystem<f64>, f64) {
        let dt = self.config.dt;
        let w: Vec<f64> = state.current.iter().zip(&state.previous).map(|(a, b)| 2.0 * a - b).collect();
        let history: Vec<f64> = state.current.iter().zip(&state.previous).map(|(a, b)| (4.0 * a - b) / (2.0 * dt)).collect();
        let t = (state.step + 1) as f64 * dt;
        self.system_with(1.5 / dt, &w, &history, t)
    }

    fn advance(&mut self, state: &FieldState, system: &SparseSystem<f64>, sigma: f64) -> Result<(FieldState, StepDiagnostics), SolveError> {
        let (x, report) = self.solver.solve_system(system)?;
        let step = state.step + 1;
        let next = FieldState {
            current: system.velocity(&x).to_vec(),
            previous: state.current.clone(),
            older: if state.step == 0 { state.current.clone() } else { state.previous.clone() },
            pressure: system.pressure(&x).to_vec(),
            step,
            t: step as f64 * self.config.dt,
        };
        Ok((next, StepDiagnostics { penalty: sigma, relative_residual: report.relative_residual }))
    }

    pub fn step_bdf1(&mut self, state: &FieldState) -> Result<(FieldState, StepDiagnostics), SolveError> {
        assert_eq!(state.step, 0, "startup step needs a level-zero state");
        let (system, sigma) = self.system_bdf1(state);
        self.advance(state, &system, sigma)
    }

    pub fn step_bdf2(&mut self, state: &FieldState) -> Result<(FieldState, StepDiagnostics), SolveError> {
        assert!(state.step >= 1, "BDF2 needs two history levels");
        let (system, sigma) = self.system_bdf2(state);
        self.advance(state, &system, sigma)
    }

    /// Startup step at level zero, BDF2 afterwards.
    pub fn step(&mut self, state: &FieldState) -> Result<(FieldState, StepDiagnostics), SolveError> {
        if state.step == 0 {
            self.step_bdf1(state)
        } else {
            self.step_bdf2(state)
        }
    }

    fn observe(&self, stats: &mut TrajectoryStats, state: &FieldState) {
        let u = &state.current;
        let c = &self.config;
        stats.max_div = stats.max_div.max(div_norm(&self.disc.velocity, u));
        stats.max_energy = stats.max_energy.max(energy_functional(u, c.epsilon, c.beta, c.mu, &self.blocks));
        stats.max_l2_box = stats.max_l2_box.max(self.blocks.mass.quadratic_form(u, u).max(0.0).sqrt());
        if state.step >= 1 {
            let t = state.t;
            let (l2, semi) = error_parts_omega(&self.disc, u, |p| exact_velocity(t, p), |p| exact_velocity_gradient(t, p));
            stats.err_l2h1_sq += c.dt * (l2 + semi);
            stats.err_l2_final = l2.sqrt();
        }
    }

    /// Runs from `t = 0` to `T`, stopping at the first solver failure.
    pub fn run(&mut self) -> RunOutcome {
        let started = Instant::now();
        let mut state = self.initialize();
        let mut stats = TrajectoryStats { min_penalty: f64::INFINITY, ..Default::default() };
        self.observe(&mut stats, &state);
        let mut failure = None;
        let mut last_system = None;
        for _ in 0..self.config.steps() {
            let (system, sigma) = if state.step == 0 { self.system_bdf1(&state) } else { self.system_bdf2(&state) };
            match self.advance(&state, &system, sigma) {
                Ok((next, diag)) => {
                    stats.min_penalty = stats.min_penalty.min(diag.penalty);
                    stats.max_residual = stats.max_residual.max(diag.relative_residual);
                    stats.steps_taken += 1;
                    state = next;
                    self.observe(&mut stats, &state);
                    last_system = Some(system);
                }
                Err(e) => {
                    failure = Some(e);
                    last_system = Some(system);
                    break;
                }
            }
        }
        if self.config.estimate_condition {
            stats.cond_estimate = last_system.map(|s| match self.solver.factorize_bordered(&s) {
                Ok(f) => condition_estimate_with(&f, &s.matrix, CONDITION_ITERATIONS),
                Err(_) => f64::INFINITY,
            });
        }
        let c = &self.config;
        let status = if failure.is_some() { RunStatus::SolverFailed } else { RunStatus::Ok };
        let (err_l2_final, err_l2h1) =
            if failure.is_some() { (f64::NAN, f64::NAN) } else { (stats.err_l2_final, stats.err_l2h1_sq.sqrt()) };
        let record = SweepRecord {
            beta: c.beta,
            epsilon: c.epsilon,
            h: c.h(),
            dt: c.dt,
            mu: c.mu,
            err_l2_final,
            err_l2h1,
            max_div: stats.max_div,
            max_energy: stats.max_energy,
            cond_estimate: stats.cond_estimate,
            wall_seconds: started.elapsed().as_secs_f64(),
            status,
        };
        RunOutcome { stats, record, final_state: state, failure }
    }
}

/// Builds the discretization and runs one configuration.
pub fn run(config: &RunConfig) -> Result<RunOutcome, Error> {
    Ok(Simulation::new(config.clone())?.run())
}

/// Solves an assembled system once with the configured tolerance; used by
/// checks that need the raw solution vector.
pub fn solve_once(system: &SparseSystem<f64>, tolerance: f64) -> Result<Vec<f64>, SolveError> {
    DirectSolver::new(tolerance).solve_system(system).map(|(x, _)| x)
}
