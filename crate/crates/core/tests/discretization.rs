use std::sync::Arc;

use approx::assert_relative_eq;
use kmv_fwi::discretization::{
    apply_stiffness, assemble_dense_mass, assemble_stiffness, build_dofmap, estimate_dt_cfl, interpolate_velocity,
    FieldSetup, PmlSpec, PointInterpolator, Space,
};
use kmv_fwi::elements::kmv_element;
use kmv_fwi::grid::Grid2;
use kmv_fwi::io::VelocityModel;
use kmv_fwi::mesh::{structured_mesh, BoundaryKinds, BoundaryTag, Domain, Mesh, PmlWidths, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(h: f64) -> (Domain, Mesh) {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default());
    let m = structured_mesh(&d, h, BoundaryKinds::default()).unwrap();
    (d, m)
}

fn setup(mesh: Mesh, domain: Domain, degree: u32, c: f64) -> FieldSetup<f64> {
    let sp = Arc::new(Space::new(mesh, degree, PmlSpec::disabled(domain)).unwrap());
    let n = sp.n_dofs();
    FieldSetup::new(sp, vec![c; n]).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn dof_counts_on_eight_triangle_square() {
    let (_, m) = square(0.5);
    assert_eq!(build_dofmap(&m, &kmv_element(1).unwrap()).unwrap().n_dofs, 9);
    assert_eq!(build_dofmap(&m, &kmv_element(2).unwrap()).unwrap().n_dofs, 33);
    // KMV3: 9 vertices + 2 per edge + 3 per triangle
    assert_eq!(build_dofmap(&m, &kmv_element(3).unwrap()).unwrap().n_dofs, 9 + 32 + 24);
}

#[test]
fn dof_numbering_matches_brute_force_node_dedup() {
    let (_, m) = square(0.25);
    for degree in 1..=3 {
        let el = kmv_element(degree).unwrap();
        let dm = build_dofmap(&m, &el).unwrap();
        let mut nodes: Vec<[f64; 2]> = Vec::new();
        for t in 0..m.n_triangles() {
            let [a, b, c] = m.triangle_points(t);
            for (q, xi) in el.nodes.iter().enumerate() {
                let x = [
                    a[0] + xi[0] * (b[0] - a[0]) + xi[1] * (c[0] - a[0]),
                    a[1] + xi[0] * (b[1] - a[1]) + xi[1] * (c[1] - a[1]),
                ];
                let d = dm.element_dofs(t)[q];
                assert!((dm.coords[d][0] - x[0]).abs() < 1e-12 && (dm.coords[d][1] - x[1]).abs() < 1e-12);
                if !nodes.iter().any(|n| (n[0] - x[0]).abs() < 1e-9 && (n[1] - x[1]).abs() < 1e-9) {
                    nodes.push(x);
                }
            }
        }
        assert_eq!(nodes.len(), dm.n_dofs, "degree {degree}");
    }
}

#[test]
fn triangle_permutation_keeps_dof_count() {
    let (d, m) = square(0.25);
    let mut tris = m.triangles.clone();
    tris.reverse();
    let m2 = Mesh::from_parts(m.vertices.clone(), tris, &d, BoundaryKinds::default()).unwrap();
    let el = kmv_element(3).unwrap();
    assert_eq!(build_dofmap(&m, &el).unwrap().n_dofs, build_dofmap(&m2, &el).unwrap().n_dofs);
}

#[test]
fn velocity_interpolation() {
    let g = Grid2::new(2, 2, [0.0, -1.0], [1.0, 1.0]).unwrap();
    let vm = VelocityModel::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let (_, m) = square(0.5);
    let dm = build_dofmap(&m, &kmv_element(1).unwrap()).unwrap();
    let c: Vec<f64> = interpolate_velocity(&vm, &dm);
    let centre = dm.coords.iter().position(|p| p == &[0.5, -0.5]).unwrap();
    assert_relative_eq!(c[centre], 2.5, epsilon = 1e-15);
    let corner = dm.coords.iter().position(|p| p == &[1.0, 0.0]).unwrap();
    assert_eq!(c[corner], 4.0);
    let flat = VelocityModel::uniform(g, 1.43).unwrap();
    assert!(interpolate_velocity::<f64>(&flat, &dm).iter().all(|&v| v == 1.43));
}

#[test]
fn lumped_mass_partition_of_unity_and_reference_weights() {
    let (d, m) = square(0.2);
    for degree in 1..=3 {
        let fs = setup(m.clone(), d, degree, 1.0);
        assert_relative_eq!(fs.space.mass.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(fs.space.mass.iter().all(|&v| v > 0.0));
    }
    let rd = Domain::new(Rect::new(0.0, 1.0, 0.0, 1.0), PmlWidths::default());
    let reference = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &rd, BoundaryKinds::default()).unwrap();
    let fs = setup(reference, rd, 2, 1.0);
    let el = kmv_element(2).unwrap();
    let dofs = fs.space.dofmap.element_dofs(0);
    for (q, &dof) in dofs.iter().enumerate() {
        assert_relative_eq!(fs.space.mass[dof], el.weights[q], epsilon = 1e-15);
    }
}

#[test]
fn dense_mass_is_diagonal() {
    let rd = Domain::new(Rect::new(0.0, 1.0, 0.0, 1.0), PmlWidths::default());
    let two = Mesh::from_parts(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        &rd,
        BoundaryKinds::default(),
    )
    .unwrap();
    for degree in 1..=3 {
        let fs = setup(two.clone(), rd, degree, 1.0);
        let m = assemble_dense_mass(&fs.space);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j {
                    assert!(v > 0.0);
                    assert_relative_eq!(v, fs.space.mass[i], epsilon = 1e-15);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}

#[test]
fn stiffness_kernel_and_symmetry() {
    let (d, m) = square(0.2);
    for degree in 1..=3 {
        let fs = setup(m.clone(), d, degree, 1.7);
        let n = fs.n_dofs();
        let ku = apply_stiffness(&fs, &vec![1.0; n]);
        assert!(ku.iter().all(|v| v.abs() < 1e-12), "degree {degree}");
        let (u, v) = (random_vec(n, 1), random_vec(n, 2));
        let (kuv, ukv) = (dot(&apply_stiffness(&fs, &u), &v), dot(&u, &apply_stiffness(&fs, &v)));
        assert!((kuv - ukv).abs() <= 1e-11 * kuv.abs().max(1.0));
        // matrix-free and assembled agree
        let csr = assemble_stiffness(&fs);
        let a = csr.matvec(&u);
        let b = apply_stiffness(&fs, &u);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
    }
}

#[test]
fn linear_stiffness_matches_cotangent_formula() {
    let rd = Domain::new(Rect::new(-1.0, 2.0, -1.0, 2.0), PmlWidths::default());
    let p = [[0.1, 0.2], [1.3, -0.1], [0.4, 0.9]];
    let tri = Mesh::from_parts(p.to_vec(), vec![[0, 1, 2]], &rd, BoundaryKinds::default()).unwrap();
    let fs = setup(tri, rd, 1, 1.0);
    let k = assemble_stiffness(&fs);
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    // K_ij = -cot(θ_k)/2 for the angle θ_k opposite edge ij
    let cot = |k: usize| {
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs()
    };
    let entry = |i: usize, j: usize| k.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let opp = 3 - i - j;
                assert_relative_eq!(entry(i, j), -0.5 * cot(opp), epsilon = 1e-12);
            }
        }
        let diag: f64 = (0..3).filter(|&j| j != i).map(|j| -entry(i, j)).sum();
        assert_relative_eq!(entry(i, i), diag, epsilon = 1e-12);
    }
    assert!(area > 0.0);
}

/// Cholesky of `K + 1 1ᵀ / n` succeeds only if constants span the kernel of `K`.
#[test]
fn stiffness_kernel_is_constants_only() {
    let (d, m) = square(0.34);
    let fs = setup(m, d, 2, 1.0);
    let k = assemble_stiffness(&fs);
    let n = fs.n_dofs();
    let mut a = vec![vec![1.0 / n as f64; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in k.row(i) {
            row[j] += v;
        }
    }
    for j in 0..n {
        let s: f64 = (0..j).map(|k| a[j][k] * a[j][k]).sum();
        let piv = a[j][j] - s;
        assert!(piv > 1e-10, "pivot {j} = {piv}");
        a[j][j] = piv.sqrt();
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| a[i][k] * a[j][k]).sum();
            a[i][j] = (a[i][j] - s) / a[j][j];
        }
    }
}

#[test]
fn cfl_scales_with_h_and_c() {
    let (d, m) = square(0.1);
    let (_, fine) = square(0.05);
    let fs = setup(m.clone(), d, 2, 1.5);
    let dt = estimate_dt_cfl(&fs);
    let dt_fine = estimate_dt_cfl(&setup(fine, d, 2, 1.5));
    assert!((dt / dt_fine - 2.0).abs() < 0.2, "ratio {}", dt / dt_fine);
    let dt_fast = estimate_dt_cfl(&fs.with_velocity(vec![3.0; fs.n_dofs()]).unwrap());
    assert_relative_eq!(dt_fast, 0.5 * dt, max_relative = 1e-12);
}

#[test]
fn pml_coupling_vanishes_without_damping() {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.2));
    let m = structured_mesh(&d, 0.1, BoundaryKinds::default()).unwrap();
    let fs = setup(m, d, 2, 1.5);
    let n = fs.n_dofs();
    assert!(fs.space.sigma_x.iter().chain(&fs.space.sigma_z).all(|&s| s == 0.0));
    assert!(fs.space.pml_elements.is_empty());
    let u = random_vec(n, 3);
    let (mut ox, mut oz) = (vec![0.0; n], vec![0.0; n]);
    let mut scratch = [vec![0.0; n], vec![0.0; n]];
    fs.add_pml_coupling(&u, &mut ox, &mut oz, &mut scratch);
    assert!(ox.iter().chain(&oz).all(|&v| v == 0.0));
}

#[test]
fn pml_coupling_transpose_pairing() {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.25));
    let m = structured_mesh(&d, 0.125, BoundaryKinds::default()).unwrap();
    let sp = Arc::new(Space::new(m, 3, PmlSpec::new(d, 2.0).unwrap()).unwrap());
    let n = sp.n_dofs();
    let fs = FieldSetup::new(sp, random_vec(n, 4).iter().map(|v| 2.0 + v).collect()).unwrap();
    let u = random_vec(n, 5);
    let (mx, mz) = (random_vec(n, 6), random_vec(n, 7));
    let mut scratch = [vec![0.0; n], vec![0.0; n]];
    let (mut ox, mut oz) = (vec![0.0; n], vec![0.0; n]);
    fs.add_pml_coupling(&u, &mut ox, &mut oz, &mut scratch);
    let mut back = vec![0.0; n];
    fs.add_pml_coupling_t(&mx, &mz, &mut back, &mut scratch);
    let lhs = dot(&ox, &mx) + dot(&oz, &mz);
    let rhs = dot(&u, &back);
    assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
}

#[test]
fn boundary_damping_on_absorbing_edges_only() {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::default());
    let kinds = BoundaryKinds { top: BoundaryTag::FreeSurface, ..BoundaryKinds::default() };
    let m = structured_mesh(&d, 0.25, kinds).unwrap();
    let fs = setup(m, d, 3, 2.0);
    // perimeter excluding the free surface, times c
    assert_relative_eq!(fs.boundary.iter().sum::<f64>(), 3.0 * 2.0, epsilon = 1e-12);
    for (p, &b) in fs.space.dofmap.coords.iter().zip(&fs.boundary) {
        let on_absorbing = p[0].abs() < 1e-12 || (p[0] - 1.0).abs() < 1e-12 || (p[1] + 1.0).abs() < 1e-12;
        assert_eq!(b > 0.0, on_absorbing, "{p:?}");
    }
}

#[test]
fn single_precision_stiffness_tracks_double() {
    let (d, m) = square(0.2);
    let sp64 = Arc::new(Space::<f64>::new(m.clone(), 2, PmlSpec::disabled(d)).unwrap());
    let sp32 = Arc::new(Space::<f32>::new(m, 2, PmlSpec::disabled(d)).unwrap());
    let n = sp64.n_dofs();
    let fs64 = FieldSetup::new(sp64, vec![1.5; n]).unwrap();
    let fs32 = FieldSetup::new(sp32, vec![1.5f32; n]).unwrap();
    let u = random_vec(n, 8);
    let u32v: Vec<f32> = u.iter().map(|&v| v as f32).collect();
    let a = apply_stiffness(&fs64, &u);
    let b = apply_stiffness(&fs32, &u32v);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - *y as f64).abs() < 1e-4 * scale));
}

fn interp_space(degree: u32) -> Space<f64> {
    let d = Domain::new(Rect::new(0.0, 1.0, -1.0, 0.0), PmlWidths::uniform(0.2));
    let m = structured_mesh(&d, 0.1, BoundaryKinds::default()).unwrap();
    Space::new(m, degree, PmlSpec::disabled(d)).unwrap()
}

#[test]
fn interpolator_node_hit_and_outside() {
    let sp = interp_space(2);
    let node = sp.dofmap.coords[17];
    let h = PointInterpolator::new(&sp, &[node]).unwrap();
    assert_eq!(h.rows[0], vec![(17, 1.0)]);
    assert!(PointInterpolator::new(&sp, &[[5.0, 0.0]]).is_err());
}

proptest! {
    #[test]
    fn interpolator_reproduces_linear_fields(degree in 1u32..=3, seed in 0u64..500) {
        let sp = interp_space(degree);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..10).map(|_| [rng.gen_range(-0.2..1.2), rng.gen_range(-1.2..0.2)]).collect();
        let h = PointInterpolator::new(&sp, &pts).unwrap();
        let f: Vec<f64> = sp.dofmap.coords.iter().map(|p| p[0] + p[1]).collect();
        for (v, p) in h.eval(&f).iter().zip(&pts) {
            prop_assert!((v - (p[0] + p[1])).abs() < 1e-12);
        }
        for row in &h.rows {
            prop_assert!((row.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Hᵀ is the adjoint of H
        let u: Vec<f64> = (0..sp.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ht = vec![0.0; sp.n_dofs()];
        h.scatter_add(&r, &mut ht);
        let lhs: f64 = h.eval(&u).iter().zip(&r).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - dot(&u, &ht)).abs() < 1e-12);
    }
}
