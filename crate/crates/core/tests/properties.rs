use std::f64::consts::PI;

use capillary::cap::even_defect;
use capillary::*;
use proptest::prelude::*;

fn field() -> impl Strategy<Value = (f64, usize, usize, Vec<f64>)> {
    (0.1f64..(PI / 2.0), 4usize..10, 2usize..8).prop_flat_map(|(theta, n_phi, half)| {
        let n_psi = 2 * half;
        (
            Just(theta),
            Just(n_phi),
            Just(n_psi),
            prop::collection::vec(-1e3f64..1e3, n_phi * n_psi),
        )
    })
}

proptest! {
    #[test]
    fn symmetrize_is_a_projection((theta, n_phi, n_psi, values) in field()) {
        let g = build_grid(theta, n_phi, n_psi).unwrap();
        let f = ScalarField::new(&g, values).unwrap();
        let once = symmetrize_even(&g, &f).unwrap();
        let twice = symmetrize_even(&g, &once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(even_defect(&g, &once).unwrap(), 0.0);
    }

    #[test]
    fn field_json_round_trip((theta, n_phi, n_psi, values) in field()) {
        let g = build_grid(theta, n_phi, n_psi).unwrap();
        let f = ScalarField::new(&g, values).unwrap();
        prop_assert_eq!(ScalarField::from_json(&f.to_json().unwrap()).unwrap(), f);
    }

    #[test]
    fn field_csv_round_trip((theta, n_phi, n_psi, values) in field()) {
        let g = build_grid(theta, n_phi, n_psi).unwrap();
        let f = ScalarField::new(&g, values).unwrap();
        let mut buf = b"# header line\n".to_vec();
        f.write_csv(&g, &mut buf).unwrap();
        prop_assert_eq!(ScalarField::read_csv(&g, buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn robin_condition_is_linear((theta, n_phi, n_psi, values) in field(), c in -5.0f64..5.0) {
        let g = build_grid(theta, n_phi, n_psi).unwrap();
        let f = ScalarField::new(&g, values).unwrap();
        let a = robin_residual(&g, &f).unwrap();
        let b = robin_residual(&g, &f.map(|v| c * v)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((c * x - y).abs() <= 1e-9 * (1.0 + x.abs()) * (1.0 + c.abs()));
        }
    }

    #[test]
    fn curvature_of_scaled_ell(theta in 0.2f64..1.5, c in 0.1f64..10.0) {
        // b is linear in h, so b(c ell) = c b(ell)
        let g = build_grid(theta, 8, 16).unwrap();
        let l = ell_field(&g);
        let base = curvature_tensor(&g, &l).unwrap();
        let scaled = curvature_tensor(&g, &l.map(|v| c * v)).unwrap();
        for k in 0..g.n_cells() {
            prop_assert!((scaled.sigma1[k] - c * base.sigma1[k]).abs() <= 1e-12 * c);
            prop_assert!((scaled.det_b[k] - c * c * base.det_b[k]).abs() <= 1e-12 * c * c);
        }
    }
}
