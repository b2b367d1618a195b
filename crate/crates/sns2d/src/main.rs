//! Thin driver: `sns2d run <config>`, `sns2d resume <checkpoint>`,
//! `sns2d validate <config>`. Flags select only the file and verbosity;
//! everything else lives in the config. Worker count follows
//! `RAYON_NUM_THREADS`.

use std::process::ExitCode;

use sns2d::config::ExperimentSpec;
use sns2d::experiment;

const USAGE: &str = "usage: sns2d [-q] <command> <file>

commands:
  run <config.ini>        execute the experiment, write reports, exit 0 on pass
  resume <checkpoint.bin> continue a checkpointed simulate run to its horizon
  validate <config.ini>   parse and validate, print the resolved config

exit codes: 0 pass, 1 internal/i-o error, 2 check failed, 3 blowup, 4 config error";

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let quiet = if let Some(pos) = args.iter().position(|a| a == "-q" || a == "--quiet") {
        args.remove(pos);
        true
    } else {
        false
    };
    let (command, path) = match (args.first(), args.get(1)) {
        (Some(c), Some(p)) if args.len() == 2 => (c.clone(), p.clone()),
        _ => {
            eprintln!("{USAGE}");
            return ExitCode::from(4);
        }
    };

    match command.as_str() {
        "run" => {
            let spec = match load_spec(&path) {
                Ok(spec) => spec,
                Err(code) => return code,
            };
            match experiment::run(&spec) {
                Ok(report) => {
                    if !quiet {
                        for note in &report.notes {
                            eprintln!("note: {note}");
                        }
                        for artifact in &report.artifacts {
                            println!("wrote {}", artifact.display());
                        }
                    }
                    for failure in &report.failures {
                        eprintln!("check failed: {failure}");
                    }
                    if report.passed() {
                        if !quiet {
                            println!("all checks passed");
                        }
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        "resume" => match experiment::resume(std::path::Path::new(&path)) {
            Ok(report) => {
                if !quiet {
                    for artifact in &report.artifacts {
                        println!("wrote {}", artifact.display());
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        "validate" => match load_spec(&path) {
            Ok(spec) => {
                print!("{}", spec.resolved_ini());
                if !quiet {
                    eprintln!("config ok (hash {})", spec.config_hash());
                }
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        other => {
            eprintln!("unknown command '{other}'\n{USAGE}");
            ExitCode::from(4)
        }
    }
}

fn load_spec(path: &str) -> Result<ExperimentSpec, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read '{path}': {e}");
            return Err(ExitCode::from(1));
        }
    };
    ExperimentSpec::parse(&text).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(4)
    })
}
