//! Scheduler submit scripts that re-invoke the tool inside an allocation.

use crate::error::{Error, Result};

use super::{ENV_PBS, ENV_SLURM};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmitResources {
    pub nodes: u32,
    /// `HH:MM:SS`, see [`parse_walltime`].
    pub walltime: String,
    pub cores_per_node: u32,
    pub job_name: String,
    /// Tool invocation run by the script, one argv element per entry.
    pub invocation: Vec<String>,
}

/// Accepts `HH:MM:SS`, `MM:SS` or unit suffixes such as `1h`, `90m`,
/// `1h30m`, `45s`.
pub fn parse_walltime(raw: &str) -> Result<String> {
    let bad = || Error::Config(format!("bad walltime '{raw}'"));
    let s = raw.trim();
    let secs: u64 = if s.contains(':') {
        let parts: Vec<u64> = s
            .split(':')
            .map(|p| p.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts.as_slice() {
            [h, m, sec] => h * 3600 + m * 60 + sec,
            [m, sec] => m * 60 + sec,
            _ => return Err(bad()),
        }
    } else {
        let mut total = 0u64;
        let mut num = String::new();
        for c in s.chars() {
            if c.is_ascii_digit() {
                num.push(c);
                continue;
            }
            let n: u64 = num.parse().map_err(|_| bad())?;
            num.clear();
            total += n * match c {
                'd' => 86400,
                'h' => 3600,
                'm' => 60,
                's' => 1,
                _ => return Err(bad()),
            };
        }
        if !num.is_empty() {
            // bare number: minutes, as sbatch reads it
            total += num.parse::<u64>().map_err(|_| bad())? * 60;
        }
        total
    };
    if secs == 0 {
        return Err(bad());
    }
    Ok(format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60))
}

pub fn emit_submit_script(env: &str, res: &SubmitResources) -> Result<String> {
    if res.nodes == 0 || res.cores_per_node == 0 {
        return Err(Error::Config("submit script needs at least one node and core".into()));
    }
    let cmd = shell_words::join(&res.invocation);
    let mut s = String::from("#!/bin/bash\n");
    match env {
        ENV_SLURM => {
            s += &format!("#SBATCH --job-name={}\n", res.job_name);
            s += &format!("#SBATCH --nodes={}\n", res.nodes);
            s += "#SBATCH --ntasks-per-node=1\n";
            s += &format!("#SBATCH --cpus-per-task={}\n", res.cores_per_node);
            s += &format!("#SBATCH --time={}\n", res.walltime);
            s += &format!("#SBATCH --output={}-%j.log\n", res.job_name);
            s += "\nset -euo pipefail\n";
        }
        ENV_PBS => {
            s += &format!("#PBS -N {}\n", res.job_name);
            s += &format!("#PBS -l nodes={}:ppn={}\n", res.nodes, res.cores_per_node);
            s += &format!("#PBS -l walltime={}\n", res.walltime);
            s += "#PBS -j oe\n";
            s += "\nset -euo pipefail\ncd \"$PBS_O_WORKDIR\"\n";
        }
        other => {
            return Err(Error::Config(format!(
                "no submit script format for execution environment '{other}'"
            )))
        }
    }
    s += &format!("exec {cmd}\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walltimes() {
        assert_eq!(parse_walltime("1h").unwrap(), "01:00:00");
        assert_eq!(parse_walltime("1h30m").unwrap(), "01:30:00");
        assert_eq!(parse_walltime("90").unwrap(), "01:30:00");
        assert_eq!(parse_walltime("2:00:05").unwrap(), "02:00:05");
        assert_eq!(parse_walltime("1d").unwrap(), "24:00:00");
        assert!(parse_walltime("1x").is_err());
        assert!(parse_walltime("0").is_err());
    }

    #[test]
    fn rejects_local() {
        let r = SubmitResources {
            nodes: 1,
            walltime: "01:00:00".into(),
            cores_per_node: 1,
            job_name: "j".into(),
            invocation: vec!["xbatch".into()],
        };
        assert!(emit_submit_script("hpc.local", &r).is_err());
        assert!(emit_submit_script(ENV_PBS, &r).unwrap().contains("#PBS -l nodes=1:ppn=1\n"));
    }
}
