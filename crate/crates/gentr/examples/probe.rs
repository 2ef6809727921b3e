use gentr::curve::SpectralCurve;
use gentr::engine::Engine;
use gentr::potential::{extract_potential, golden_compare, golden_row};
use std::time::Instant;

fn run(r: i64, s: i64, chi: i64) {
    let t0 = Instant::now();
    let row = golden_row(r, s).unwrap();
    let c = SpectralCurve::golden_curve(r, s, row.sign).unwrap();
    let mut e = Engine::new(c).unwrap();
    match extract_potential(&mut e, chi) {
        Ok(p) => {
            let rep = golden_compare(&p, &row);
            println!("rs({r},{s}) chi={chi}: {:?} [{:?}]", rep.verdict, t0.elapsed());
            for w in rep.witnesses.iter().filter(|w| w.verdict != gentr::report::Verdict::Pass).take(4) {
                println!("   {} — {}", w.what, w.detail);
            }
        }
        Err(err) => println!("rs({r},{s}) chi={chi}: ERROR {err} [{:?}]", t0.elapsed()),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    run(args[1].parse().unwrap(), args[2].parse().unwrap(), args[3].parse().unwrap());
}
