//! Scratch calibration: flow probes for the presets.

use uniflow_core::energy::{energy_ericksen, energy_total};
use uniflow_core::flow::{FlowDriver, Model};
use uniflow_core::mesh::assemble_stiffness;
use uniflow_core::scenarios::{MeshSpec, PlaneBasis, Scenario, ScenarioKind};
use uniflow_core::scenarios::{circle_curve, loop_from_curve, winding_around_nodes};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("7.2");
    let max_steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100000);

    let (kind, name) = match which {
        "7.1" => (ScenarioKind::Orientable2d, "orientable"),
        "7.2" => (ScenarioKind::HalfDefect2d, "half defect"),
        "7.3" => (ScenarioKind::LineDefect3d, "line defect"),
        "7.4" => (ScenarioKind::SaturnRing, "saturn"),
        _ => panic!("unknown"),
    };
    let mut sc = Scenario::preset(kind);
    sc.flow.max_steps = max_steps;
    if let Some(cells) = args.get(3).and_then(|s| s.parse::<usize>().ok()) {
        if let MeshSpec::Box { cells: c, .. } = &mut sc.mesh {
            *c = cells;
        }
    }
    let t0 = std::time::Instant::now();
    let mesh = sc.mesh.build().unwrap().unwrap();
    let graph = assemble_stiffness(&mesh).unwrap();
    let state = sc.initial_state(&mesh).unwrap();
    println!("{name}: {} nodes, mesh+assembly {:?}", mesh.n_nodes(), t0.elapsed());
    let e0 = energy_total(&mesh, &graph, sc.well.as_ref(), &state);
    println!("E0 = {}", e0.e_total);

    let bc = sc.boundary_conditions();
    let gs = bc.gamma_s_nodes(&mesh);
    let gt = bc.gamma_theta_nodes(&mesh);
    let mut driver = FlowDriver::new(&mesh, &graph, sc.well.as_ref(), Model::Uniaxial, sc.flow, &gs, &gt).unwrap();
    let t0 = std::time::Instant::now();
    let (fin, report) = driver.run(state.clone()).unwrap();
    let el = t0.elapsed();
    let ef = report.final_energy();
    println!(
        "final E = {} after {} steps [{:?}; {:.1} ms/step] termination {:?}",
        ef.e_total, report.steps.len(), el, el.as_secs_f64()*1000.0/report.steps.len().max(1) as f64, report.termination
    );
    println!("min s = {} at {:?}", report.min_s, mesh.node(report.min_s_node));
    println!("telescope lhs = {} vs E0 = {}", report.telescope_lhs, report.initial.e_total);

    // winding checks
    match kind {
        ScenarioKind::Orientable2d | ScenarioKind::HalfDefect2d => {
            let curve = circle_curve(&[0.5, 0.5, 0.0], 0.35, 720, &PlaneBasis::xy());
            let nodes = loop_from_curve(&mesh, &curve);
            match winding_around_nodes(&fin.theta, &nodes, &PlaneBasis::xy()) {
                Ok(w) => println!("winding(center, r=0.35) = {w}"),
                Err(e) => println!("winding failed: {e}"),
            }
        }
        ScenarioKind::LineDefect3d => {
            for k in 0..=4 {
                let z = 0.25 * k as f64;
                let curve = circle_curve(&[0.5, 0.5, z], 0.42, 720, &PlaneBasis::xy());
                let nodes = loop_from_curve(&mesh, &curve);
                match winding_around_nodes(&fin.theta, &nodes, &PlaneBasis::xy()) {
                    Ok(w) => println!("winding(z={z}) = {w}"),
                    Err(e) => println!("winding(z={z}) failed: {e}"),
                }
            }
            let set = uniflow_core::scenarios::extract_singular_set(&mesh, &fin.s, (report.min_s*2.5).min(0.9)).unwrap();
            println!("iso set: {} triangles, {} surface components, {} element components",
                set.triangles.len(), set.n_surface_components, set.n_element_components);
        }
        ScenarioKind::SaturnRing => {
            // locate the ring core in the y = c plane
            let c = uniflow_core::scenarios::saturn::CENTER;
            let mut best = (f64::INFINITY, 0usize);
            for i in 0..mesh.n_nodes() {
                let p = mesh.node(i);
                if (p[1]-c[1]).abs() < 0.03 && p[2].abs() < 0.15 && p[0] > c[0] {
                    if fin.s.0[i] < best.0 { best = (fin.s.0[i], i); }
                }
            }
            let p = mesh.node(best.1);
            println!("core candidate: s = {} at {:?} (dist from center {})", best.0, p,
                ((p[0]-c[0]).powi(2)+(p[1]-c[1]).powi(2)+p[2].powi(2)).sqrt());
            for radius in [0.03, 0.04, 0.05] {
                let center = [p[0], c[1], 0.0];
                let curve = circle_curve(&center, radius, 720, &PlaneBasis::xz());
                let nodes = loop_from_curve(&mesh, &curve);
                match winding_around_nodes(&fin.theta, &nodes, &PlaneBasis::xz()) {
                    Ok(w) => println!("winding(core, r={radius}) = {w} ({} loop nodes)", nodes.len()),
                    Err(e) => println!("winding(core, r={radius}) failed: {e}"),
                }
            }
        }
    }

    if let Some(kappa) = sc.ericksen_kappa {
        let mut driver = FlowDriver::new(&mesh, &graph, sc.well.as_ref(), Model::Ericksen { kappa }, sc.flow, &gs, &gt).unwrap();
        let t0 = std::time::Instant::now();
        let (erk, erk_report) = driver.run(state).unwrap();
        let e_erk = energy_ericksen(&graph, &erk.s, &erk.n, kappa);
        println!("ericksen: 2 E_erk = {} after {} steps [{:?}], min s = {}",
            2.0*e_erk, erk_report.steps.len(), t0.elapsed(), erk_report.min_s);
    }
}
