//! Runs the convexification pipeline on every built-in spec and prints the
//! constants and the verification reports.

use convexdef::convexify::{center_point, try_full_convexify, ConvexifyConfig};
use convexdef::spec::{corpus_spec, CORPUS};

fn main() -> convexdef::Result<()> {
    for name in CORPUS {
        let spec = corpus_spec(name).expect("built-in spec");
        let center = center_point(&spec, &spec.seed_point)?;
        let attempt = try_full_convexify(&spec, &center, &ConvexifyConfig::default())?;
        let res = &attempt.result;
        println!(
            "{name}: verified={} radius={:?} K={:?} alpha={:?} beta={:?}",
            attempt.verified, res.patch_radius, res.constants.k, res.constants.alpha, res.constants.beta
        );
        for r in &res.reports {
            println!(
                "    {:<28} {} worst={:e} n={}",
                r.check_name,
                if r.pass { "pass" } else { "FAIL" },
                r.worst_value,
                r.samples
            );
        }
    }
    Ok(())
}
