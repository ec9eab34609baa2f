use qnet_core::{phi_density, sample_link_bias};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// CDF of the link-bias density on a uniform grid over [0, 1/2], by cumulative Simpson.
fn cdf_grid(alpha: f64, beta: f64, panels: usize) -> Vec<f64> {
    let h = 0.5 / panels as f64;
    let f = |x: f64| phi_density(x, alpha, beta).unwrap();
    let mut cdf = vec![0.0; panels + 1];
    for i in 0..panels {
        let a = i as f64 * h;
        cdf[i + 1] = cdf[i] + h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h));
    }
    cdf
}

fn interpolate(grid: &[f64], x: f64) -> f64 {
    let panels = grid.len() - 1;
    let pos = (x / 0.5 * panels as f64).clamp(0.0, panels as f64);
    let i = (pos.floor() as usize).min(panels - 1);
    grid[i] + (pos - i as f64) * (grid[i + 1] - grid[i])
}

fn sup_distance(alpha: f64, beta: f64, draws: usize, seed: u64) -> f64 {
    let grid = cdf_grid(alpha, beta, 4000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..draws)
        .map(|_| sample_link_bias(alpha, beta, &mut rng).unwrap().value())
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = draws as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = interpolate(&grid, x);
            (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampler_matches_density() {
    for (alpha, beta) in [(1.0, 1.0), (2.0, 5.0), (10.0, 10.0), (7.0, 1.0)] {
        let d = sup_distance(alpha, beta, 200_000, 17);
        // DKW bound at 200k draws: 0.0044 with probability 0.999.
        assert!(d < 0.0044, "({alpha}, {beta}): sup distance {d}");
    }
}

#[test]
fn density_cdf_reaches_one_up_to_shape_fifty() {
    for alpha in [1.0, 3.0, 17.0, 50.0] {
        for beta in [1.0, 2.0, 25.0, 50.0] {
            let total = *cdf_grid(alpha, beta, 4000).last().unwrap();
            assert!((total - 1.0).abs() < 1e-9, "({alpha}, {beta}): {total}");
        }
    }
}
