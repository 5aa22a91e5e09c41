//! Regenerates the bundled synthetic EFST stand-in:
//! `cargo run -p bfm --example efst_standin > crates/bfm/data/efst.csv`

use bfm::distribution::{bfm_quantile, bfm_sample};
use bfm::{BfmParams, CauseLabel};

const N: usize = 58;
const TARGET: (usize, usize, usize) = (18, 27, 13);

fn main() {
    let p = BfmParams::new(0.0127, 0.6124, 3.5770, 0.0026).expect("valid parameters");
    let cutoff = (bfm_quantile(1.0 - TARGET.2 as f64 / N as f64, &p).expect("quantile") * 10.0).round() / 10.0;
    for seed in 0u64.. {
        let draws = bfm_sample(&p, N, seed);
        let rows: Vec<(f64, &str)> = draws
            .iter()
            .map(|d| {
                let t = (d.time * 100.0).round() / 100.0;
                if t >= cutoff {
                    (cutoff, "cen")
                } else if d.cause == CauseLabel::Cause1 {
                    (t.max(0.01), "c1")
                } else {
                    (t.max(0.01), "c2")
                }
            })
            .collect();
        let count = |s: &str| rows.iter().filter(|r| r.1 == s).count();
        if (count("c1"), count("c2"), count("cen")) != TARGET {
            continue;
        }
        let mut rows = rows;
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        println!("# name: EFST");
        println!("# time_unit: hours");
        println!(
            "# cause_labels: c1=insulation breakdown (Dhillon component); c2=degradation (exponential-power component)"
        );
        println!("# SYNTHETIC STAND-IN, not the electrode endurance test records.");
        println!(
            "# drawn with bfm_sample at (0.0127, 0.6124, 3.5770, 0.0026), seed {seed}, Type-I censoring at {cutoff} h"
        );
        println!("# regenerate: cargo run -p bfm --example efst_standin");
        println!("time,status");
        for (t, s) in rows {
            println!("{t},{s}");
        }
        return;
    }
}
