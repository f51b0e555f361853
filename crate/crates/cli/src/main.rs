//! Command-line driver: run scenarios, check meshes, evaluate energies, and
//! diagnose stored states.
//!
//! Exit codes: 0 success, 2 configuration error, 3 mesh error, 4 solver
//! failure, 5 monotonicity abort, 1 anything else (for `check-mesh`, 1 means
//! the mesh is not weakly acute).

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use uniflow_core::energy::{energy_ericksen, energy_total, verify_energy_identity};
use uniflow_core::error::Error;
use uniflow_core::fields::{make_state, BoundaryConditions, DirectorField, ScalarField};
use uniflow_core::flow::{FlowDriver, FlowReport, Model};
use uniflow_core::io;
use uniflow_core::mesh::{assemble_stiffness, check_weak_acuteness, SimplicialMesh, StiffnessGraph};
use uniflow_core::scenarios::{self, MeshSpec, PlaneBasis, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "uniflow",
    about = "Finite element solver for uniaxially constrained nematic equilibria",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario or custom problem to equilibrium.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (reserved; this build computes sequentially and
        /// deterministically regardless).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Override the pseudo time step.
        #[arg(long)]
        tau: Option<f64>,
        /// Override the step limit.
        #[arg(long)]
        max_steps: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the recorded seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Assemble a mesh file and report weak acuteness.
    CheckMesh {
        path: PathBuf,
        /// Tolerance on negative couplings.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Evaluate the energy decomposition of a stored state.
    Energy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Defect diagnostics of a stored state: winding, min-s, iso-surface.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Iso level for the singular-set extraction.
        #[arg(long, default_value_t = 0.1)]
        level: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Mesh(_) => 3,
        Error::Solver(_) => 4,
        Error::Monotonicity(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            threads,
            tau,
            max_steps,
            out,
            seed,
        } => cmd_run(&config, threads, tau, max_steps, out, seed),
        Command::CheckMesh { path, tol } => return cmd_check_mesh(&path, tol),
        Command::Energy { config, checkpoint } => cmd_energy(&config, &checkpoint),
        Command::Diagnose {
            config,
            checkpoint,
            level,
            out,
        } => cmd_diagnose(&config, &checkpoint, level, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Resolves the configured mesh source (generated recipe or file import).
fn resolve_mesh(spec: &MeshSpec) -> Result<SimplicialMesh, Error> {
    match spec.build()? {
        Some(mesh) => Ok(mesh),
        None => match spec {
            MeshSpec::File(path) => io::read_mesh(std::path::Path::new(path)),
            _ => unreachable!("only file sources defer building"),
        },
    }
}

fn print_acuteness(graph: &StiffnessGraph) {
    let report = check_weak_acuteness(graph, 1e-12);
    if report.is_weakly_acute {
        println!("mesh: weakly acute (h = {})", graph.h);
    } else {
        let (i, j) = report.worst_pair.unwrap_or((0, 0));
        println!(
            "mesh: NOT weakly acute; worst coupling k({i},{j}) = {} (h = {}). \
             Energy inequalities are not guaranteed; proceeding.",
            report.worst_k, graph.h
        );
    }
}

fn print_breakdown(tag: &str, e: &uniflow_core::EnergyBreakdown) {
    println!(
        "{tag}: E_total = {} (E_s = {}, E_ring = {}, E_bulk = {}, R_h = {}, R~_h = {})",
        e.e_total, e.e_s, e.e_ring, e.e_bulk, e.r_h, e.r_tilde
    );
}

struct Problem {
    mesh: SimplicialMesh,
    graph: StiffnessGraph,
    state: uniflow_core::DiscreteState,
    gamma_s: Vec<usize>,
    gamma_theta: Vec<usize>,
    well: Option<uniflow_core::DoubleWell>,
    ericksen_kappa: Option<f64>,
}

fn setup_problem(cfg: &io::RunConfig) -> Result<Problem, Error> {
    let mesh = resolve_mesh(&cfg.mesh)?;
    let graph = assemble_stiffness(&mesh)?;

    if let Some(scenario) = cfg.to_scenario() {
        let state = scenario.initial_state(&mesh)?;
        let bc = scenario.boundary_conditions();
        let gamma_s = bc.gamma_s_nodes(&mesh);
        let gamma_theta = bc.gamma_theta_nodes(&mesh);
        Ok(Problem {
            mesh,
            graph,
            state,
            gamma_s,
            gamma_theta,
            well: scenario.well,
            ericksen_kappa: scenario.ericksen_kappa,
        })
    } else {
        // custom problem: constant initial data plus constant per-region BCs
        let init_n = cfg.custom_init_n;
        let nrm = (init_n[0] * init_n[0] + init_n[1] * init_n[1] + init_n[2] * init_n[2]).sqrt();
        if nrm < 1e-12 {
            return Err(Error::Config("custom init: zero director".into()));
        }
        let n0 = [init_n[0] / nrm, init_n[1] / nrm, init_n[2] / nrm];
        let mut state = make_state(
            &mesh,
            ScalarField::constant(mesh.n_nodes(), cfg.custom_init_s),
            DirectorField::constant(mesh.n_nodes(), n0),
        )?;
        let mut bc = BoundaryConditions::none();
        bc.delta0 = cfg.delta0;
        for entry in &cfg.custom_bc {
            if let Some(s) = entry.s {
                bc.scalar
                    .push((entry.label.clone(), Box::new(move |_: &[f64]| s)));
            }
            if let Some(n) = entry.n {
                bc.director
                    .push((entry.label.clone(), Box::new(move |_: &[f64]| n)));
            }
        }
        uniflow_core::fields::apply_dirichlet(&mesh, &mut state, &bc)?;
        let gamma_s = bc.gamma_s_nodes(&mesh);
        let gamma_theta = bc.gamma_theta_nodes(&mesh);
        Ok(Problem {
            mesh,
            graph,
            state,
            gamma_s,
            gamma_theta,
            well: cfg.well,
            ericksen_kappa: None,
        })
    }
}

fn cmd_run(
    config: &PathBuf,
    threads: usize,
    tau: Option<f64>,
    max_steps: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(), Error> {
    if threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let mut cfg = io::load_config(config)?;
    if let Some(t) = tau {
        cfg.flow.tau = t;
    }
    if let Some(m) = max_steps {
        cfg.flow.max_steps = m;
    }
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    if let Some(s) = seed {
        cfg.output.seed = s;
    }
    cfg.flow.validate()?;

    let problem = setup_problem(&cfg)?;
    print_acuteness(&problem.graph);
    let initial = energy_total(
        &problem.mesh,
        &problem.graph,
        problem.well.as_ref(),
        &problem.state,
    );
    print_breakdown("initial", &initial);
    println!(
        "flow: tau = {}, eps = {}, max_steps = {}, seed = {}",
        cfg.flow.tau, cfg.flow.eps, cfg.flow.max_steps, cfg.output.seed
    );

    std::fs::create_dir_all(&cfg.output.dir)?;
    if cfg.flow.max_steps == 0 {
        println!("no steps taken (max_steps = 0)");
        return Ok(());
    }

    let mut driver = FlowDriver::new(
        &problem.mesh,
        &problem.graph,
        problem.well.as_ref(),
        Model::Uniaxial,
        cfg.flow,
        &problem.gamma_s,
        &problem.gamma_theta,
    )?;
    let started = std::time::Instant::now();
    let (final_state, report) = driver.run(problem.state.clone())?;
    let elapsed = started.elapsed();

    let final_energy = report.final_energy();
    print_breakdown("final", &final_energy);
    let pos = problem.mesh.node(report.min_s_node);
    println!(
        "min s = {} at node {} {:?} after {} steps ({:?}, {:.1?})",
        report.min_s,
        report.min_s_node,
        pos,
        report.steps.len(),
        report.termination,
        elapsed
    );
    if report.tau_halved {
        println!("note: tau was halved once by the monotonicity guard");
    }

    emit_outputs(&cfg, &problem.mesh, &final_state, &report)?;

    // paired director-model run for orientable experiments
    if let Some(kappa) = problem.ericksen_kappa {
        println!("running the paired director-model flow (kappa = {kappa})");
        let mut driver = FlowDriver::new(
            &problem.mesh,
            &problem.graph,
            problem.well.as_ref(),
            Model::Ericksen { kappa },
            cfg.flow,
            &problem.gamma_s,
            &problem.gamma_theta,
        )?;
        let (erk_state, erk_report) = driver.run(problem.state)?;
        let e_erk = energy_ericksen(&problem.graph, &erk_state.s, &erk_state.n, kappa);
        println!(
            "director model: doubled elastic energy 2 E_erk = {}, min s = {}, steps = {}",
            2.0 * e_erk,
            erk_report.min_s,
            erk_report.steps.len()
        );
        println!(
            "line-field vs director model: E_uni-m = {} vs 2 E_erk-m = {}",
            final_energy.e_main,
            2.0 * e_erk
        );
    }
    Ok(())
}

fn emit_outputs(
    cfg: &io::RunConfig,
    mesh: &SimplicialMesh,
    state: &uniflow_core::DiscreteState,
    report: &FlowReport,
) -> Result<(), Error> {
    let dir = &cfg.output.dir;
    if cfg.output.csv {
        io::write_energy_log(report, &dir.join("energy.csv"))?;
        println!("wrote {}", dir.join("energy.csv").display());
    }
    if cfg.output.vtk {
        io::write_vtk(mesh, state, &dir.join("state.vtk"))?;
        println!("wrote {}", dir.join("state.vtk").display());
    }
    io::write_checkpoint(mesh, state, &dir.join("state.ckpt"))?;
    println!("wrote {}", dir.join("state.ckpt").display());
    Ok(())
}

fn cmd_check_mesh(path: &PathBuf, tol: f64) -> ExitCode {
    let mesh = match io::read_mesh(path) {
        Ok(m) => m,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_code_for(&err));
        }
    };
    let graph = match assemble_stiffness(&mesh) {
        Ok(g) => g,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_code_for(&err));
        }
    };
    let report = check_weak_acuteness(&graph, tol);
    println!(
        "{} nodes, {} elements, h = {}",
        mesh.n_nodes(),
        mesh.n_elements(),
        graph.h
    );
    if report.is_weakly_acute {
        println!("weakly acute (tol = {tol})");
        ExitCode::SUCCESS
    } else {
        let (i, j) = report.worst_pair.unwrap_or((0, 0));
        println!(
            "NOT weakly acute: k({i},{j}) = {} at nodes {:?} / {:?}",
            report.worst_k,
            mesh.node(i),
            mesh.node(j)
        );
        ExitCode::from(1)
    }
}

fn load_state(
    cfg: &io::RunConfig,
    checkpoint: &PathBuf,
) -> Result<(SimplicialMesh, StiffnessGraph, uniflow_core::DiscreteState), Error> {
    let mesh = resolve_mesh(&cfg.mesh)?;
    let graph = assemble_stiffness(&mesh)?;
    let state = io::read_checkpoint(&mesh, checkpoint)?;
    Ok((mesh, graph, state))
}

fn cmd_energy(config: &PathBuf, checkpoint: &PathBuf) -> Result<(), Error> {
    let cfg = io::load_config(config)?;
    let (mesh, graph, state) = load_state(&cfg, checkpoint)?;
    let e = energy_total(&mesh, &graph, cfg.well.as_ref(), &state);
    print_breakdown("state", &e);
    let report = verify_energy_identity(&graph, &state)?;
    println!(
        "energy identity defect = {} (tilde inequality violation = {})",
        report.identity_defect, report.tilde_violation
    );
    Ok(())
}

fn cmd_diagnose(
    config: &PathBuf,
    checkpoint: &PathBuf,
    level: f64,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let cfg = io::load_config(config)?;
    let (mesh, _graph, state) = load_state(&cfg, checkpoint)?;
    let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out_dir)?;

    let (min_s, min_node) = state.min_s();
    let min_pos = mesh.node(min_node).to_vec();
    println!("min s = {min_s} at {min_pos:?}");

    let mut rows: Vec<(String, f64)> = Vec::new();
    // winding around the domain-center loop for the planar scenarios; for
    // 3-D states, per horizontal slice through the cube
    match cfg.scenario {
        Some(ScenarioKind::Orientable2d) | Some(ScenarioKind::HalfDefect2d) => {
            let curve = scenarios::circle_curve(&[0.5, 0.5, 0.0], 0.35, 720, &PlaneBasis::xy());
            let nodes = scenarios::loop_from_curve(&mesh, &curve);
            let w = scenarios::winding_around_nodes(&state.theta, &nodes, &PlaneBasis::xy())?;
            println!("winding around the domain center: {w}");
            rows.push(("winding_center".into(), w));
        }
        Some(ScenarioKind::LineDefect3d) => {
            for k in 0..5 {
                let z = 0.1 + 0.2 * k as f64;
                let curve =
                    scenarios::circle_curve(&[0.5, 0.5, z], 0.42, 720, &PlaneBasis::xy());
                let nodes = scenarios::loop_from_curve(&mesh, &curve);
                let w = scenarios::winding_around_nodes(&state.theta, &nodes, &PlaneBasis::xy())?;
                println!("winding in slice z = {z}: {w}");
                rows.push((format!("winding_z_{z}"), w));
            }
        }
        _ => {}
    }

    let set = scenarios::extract_singular_set(&mesh, &state.s, level)?;
    println!(
        "singular set at level {level}: {} elements in {} component(s), iso set in {} component(s)",
        set.elements.len(),
        set.n_element_components,
        set.n_surface_components
    );
    rows.push(("iso_level".into(), level));
    rows.push(("iso_components".into(), set.n_surface_components as f64));
    io::write_isosurface_vtk(&set, &out_dir.join("isosurface.vtk"))?;
    io::write_diagnostics_csv(&rows, min_s, &min_pos, &out_dir.join("diagnostics.csv"))?;
    println!("wrote {}", out_dir.join("isosurface.vtk").display());
    println!("wrote {}", out_dir.join("diagnostics.csv").display());
    Ok(())
}
