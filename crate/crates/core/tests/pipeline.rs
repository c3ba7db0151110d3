use lod_core::assembly::{assemble, clement, load_vector};
use lod_core::coeff::{constant_field, random_field};
use lod_core::linalg::{cg_solve, l2_norm, SaddleOptions, SparseMatrix};
use lod_core::lod::{build_space, compute_correctors, ms_initial_projection, space_from_basis};
use lod_core::mesh::{build_mesh, build_pair};
use lod_core::timestep::{backward_euler_linear, Schedule, SpaceOperators, SpaceTag, StepOptions};
use lod_core::Error;

fn rel(a: &[f64], b: &[f64], mass: &SparseMatrix) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(mass, &d).unwrap() / l2_norm(mass, b).unwrap()
}

#[test]
fn fine_space_as_multiscale_space_reproduces_reference() {
    // with H = h the Clément kernel is trivial, so the multiscale space is V_h itself
    let mesh = build_mesh(4).unwrap();
    let fem = assemble(&mesh, &random_field(3, 0.1, 100.0, 1).unwrap()).unwrap();
    let n = mesh.num_interior();
    let space = space_from_basis(SparseMatrix::identity(n), &fem, 0);
    let load = load_vector(&fem, &vec![1.0; mesh.num_nodes()]);
    let schedule = Schedule::new(0.01, 30).unwrap();
    let opts = StepOptions {
        tol: 1e-12,
        ..StepOptions::default()
    };
    let fine_ops = SpaceOperators {
        tag: SpaceTag::Fine,
        stiffness: &fem.stiffness,
        mass: &fem.mass,
        basis: None,
    };
    let ms_ops = SpaceOperators {
        tag: SpaceTag::Multiscale,
        stiffness: &space.ms_stiffness,
        mass: &space.ms_mass,
        basis: Some(&space.basis),
    };
    let u0 = vec![1.0; n];
    let step = |ops: &SpaceOperators<'_>, start: &[f64]| {
        backward_euler_linear(ops, |_, t| ops.restrict(&load).iter().map(|v| t * v).collect(), start, schedule, opts)
            .unwrap()
            .final_fine
    };
    let reference = step(&fine_ops, &u0);
    let start = ms_initial_projection(&space, &fem, &u0).unwrap();
    let ms = step(&ms_ops, &start);
    assert!(rel(&ms, &reference, &fem.mass) <= 1e-7);
}

#[test]
fn stationary_state_is_preserved() {
    let mesh = build_mesh(4).unwrap();
    let fem = assemble(&mesh, &constant_field(2.0).unwrap()).unwrap();
    let b = load_vector(&fem, &vec![1.0; mesh.num_nodes()]);
    let (u_star, _) = cg_solve(&fem.stiffness, &b, 1e-13, 10_000).unwrap();
    let ops = SpaceOperators {
        tag: SpaceTag::Fine,
        stiffness: &fem.stiffness,
        mass: &fem.mass,
        basis: None,
    };
    let opts = StepOptions {
        tol: 1e-12,
        record_stride: Some(1),
        ..StepOptions::default()
    };
    let traj = backward_euler_linear(&ops, |_, _| b.clone(), &u_star, Schedule::new(0.1, 10).unwrap(), opts).unwrap();
    for (_, u) in &traj.recorded {
        assert!(rel(u, &u_star, &fem.mass) <= 1e-9);
    }
}

#[test]
fn localized_method_beats_coarse_p1_on_a_rough_coefficient() {
    let pair = build_pair(2, 5).unwrap();
    let fem = assemble(pair.fine(), &random_field(4, 0.01, 100.0, 9).unwrap()).unwrap();
    let cl = clement(&pair, &fem);
    let set = compute_correctors(&pair, &fem, &cl, 2, SaddleOptions::default()).unwrap();
    let space = build_space(&set, &pair, &fem).unwrap();
    assert_eq!(space.dim(), 9);

    // elliptic solve with f = 1 in the fine, multiscale and coarse P1 spaces
    let b = load_vector(&fem, &vec![1.0; pair.fine().num_nodes()]);
    let (fine, _) = cg_solve(&fem.stiffness, &b, 1e-12, 10_000).unwrap();
    let solve_in = |basis: &SparseMatrix| {
        let bt = basis.transpose();
        let k = bt.matmul(&fem.stiffness.matmul(basis));
        let (c, _) = cg_solve(&k, &bt.mul_vec(&b), 1e-12, 1000).unwrap();
        basis.mul_vec(&c)
    };
    let lod = solve_in(&space.basis);
    let p1 = solve_in(&lod_core::assembly::prolongation(&pair));
    let e_lod = rel(&lod, &fine, &fem.mass);
    let e_p1 = rel(&p1, &fine, &fem.mass);
    assert!(e_lod < 0.5 * e_p1, "lod {e_lod}, p1 {e_p1}");
}

#[test]
fn errors_name_the_failing_stage() {
    assert!(matches!(build_pair(4, 4), Err(Error::Config(_))));
    assert!(matches!(build_mesh(0), Err(Error::Config(_))));
    let mesh = build_mesh(2).unwrap();
    assert!(matches!(assemble(&mesh, &random_field(3, 1.0, 2.0, 0).unwrap()), Err(Error::Config(_))));
    assert!(matches!(random_field(2, 2.0, 1.0, 0), Err(Error::Domain(_))));
    assert!(matches!(Schedule::new(0.0, 3), Err(Error::Domain(_))));
}
