//! Shared fixtures for the engine benchmarks.

use basketlv::ism::MaturityLaws;
use basketlv::smile::MarginalLaw;

/// Per-maturity laws for an N-asset lognormal desk with a tighter index
/// law, so the rearrangement has real work to do.
pub fn bench_laws(n_assets: usize, maturity: f64) -> MaturityLaws {
    let constituent_laws: Vec<MarginalLaw> = (0..n_assets)
        .map(|i| {
            MarginalLaw::lognormal(
                80.0 + 15.0 * (i % 7) as f64,
                0.22 + 0.02 * (i % 5) as f64,
                maturity,
                1201,
            )
        })
        .collect();
    let index_spot: f64 = constituent_laws.iter().map(|l| l.forward).sum::<f64>()
        / n_assets as f64
        * n_assets as f64
        * 0.066;
    let weights = vec![0.066; n_assets];
    MaturityLaws {
        maturity,
        index_law: MarginalLaw::lognormal(index_spot, 0.17, maturity, 1201),
        constituent_laws,
        weights,
    }
}
