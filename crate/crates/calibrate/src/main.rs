use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ibn_calibrate::{bloom_probability, bloom_targets, calibrate, science_model, write_all, Params};

/// Calibrates the demo science model and regenerates the bundled model files.
#[derive(Parser)]
struct Args {
    /// Output directory.
    #[arg(default_value = "models")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cal = calibrate(Params::default());
    let p = cal.params;
    println!("coordinate descent: {} sweeps, sse {:.3e}", cal.sweeps, cal.sse);
    println!(
        "pool: a={:.6} w_fe={:.6} w_p={:.6} w_n={:.6} w_o={:.6}",
        p.pool_a, p.w_fe, p.w_p, p.w_n, p.w_o
    );
    println!(
        "bloom: b0={:.6} w_bcc={} w_light={} w_temp={}",
        p.bloom_b0, p.w_bcc, p.w_light, p.w_temp
    );
    let net = science_model(&p).flatten().expect("demo model flattens");
    for t in bloom_targets() {
        println!(
            "{:<22} target {:.2}  got {:.6}",
            t.name,
            t.value,
            bloom_probability(&net, &t.evidence)
        );
    }
    match write_all(&args.dir, &p) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", args.dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
