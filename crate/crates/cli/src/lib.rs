//! Command-line front end: argument parsing, stage planning and the
//! pipeline driver.

pub mod args;
pub mod pipeline;
pub mod plan;

use std::path::Path;

use clap::Parser;
use xbatch_core::exec::{emit_submit_script, parse_walltime, SubmitResources};
use xbatch_core::PluginPath;

pub use args::Args;
pub use pipeline::run_pipeline;
pub use plan::{build_plan, PipelinePlan, Stage};

pub const EXIT_USAGE: i32 = 2;

fn write_submit_script(args: &Args, argv: &[String], path: &Path) -> anyhow::Result<()> {
    let mut invocation = args::submit_invocation(argv);
    if let Some(first) = invocation.first_mut() {
        *first = "xbatch".into();
    }
    let res = SubmitResources {
        nodes: args.submit_nodes,
        walltime: parse_walltime(&args.submit_time)?,
        cores_per_node: args.exec_jobs_per_node.unwrap_or(1) as u32,
        job_name: "xbatch".into(),
        invocation,
    };
    let script = emit_submit_script(&args.exec_env, &res)?;
    xbatch_core::fsutil::write_atomic(path, script)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))?;
    }
    log::info!("wrote {} submit script {}", args.exec_env, path.display());
    Ok(())
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let args = match Args::try_parse_from(&argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(path) = &args.emit_submit_script {
        return match write_submit_script(&args, &argv, path) {
            Ok(()) => 0,
            Err(e) => {
                log::error!("{e:#}");
                1
            }
        };
    }
    let plan = match build_plan(args, PluginPath::from_env()) {
        Ok(p) => p,
        Err(e) => {
            log::error!("{e}");
            return if matches!(e, xbatch_core::Error::Usage(_)) { EXIT_USAGE } else { 1 };
        }
    };
    run_pipeline(&plan)
}
