use acf_core::map::AlphaMap;
use acf_core::stochastics::*;
use acf_core::transfer::{invariant_density, DensityParams};

fn main() {
    for alpha in [0.7, 1.0] {
        let map = AlphaMap::new(alpha).unwrap();
        let params = DensityParams { n_cells: 2048, j_max: 50_000, tol: 1e-12, max_iter: 100_000 };
        let rho = invariant_density(&map, params).unwrap();
        let f = Observable::EntropyLog;
        let gk = variance_green_kubo(&map, &f, &rho, 200, 20_000).unwrap();
        println!("alpha={alpha} GK sigma2 = {:.6} (c0={:.6}, lags used {}, lambda {:?})",
            gk.estimate.value, gk.c0, gk.lags.len(), gk.fitted_lambda);
        for seed in [9u64, 10, 11] {
            let mn = variance_mn(&map, &f, &[256, 512, 1024], &rho, 20_000, seed).unwrap();
            println!("  seed {seed}: ladder {:?} stderr {:.4}", mn.ladder, mn.stderr);
        }
    }
}
