//! On-disk layout of a trained run:
//!
//! ```text
//! <dir>/spec.toml
//! <dir>/policy.csv
//! <dir>/options/edge_<src>_<tgt>.{bin,toml}
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::abstraction::AbstractSpec;
use crate::avi::{AbstractPolicy, PolicyKind};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::OptionPolicy;

pub const SPEC_FILE: &str = "spec.toml";
pub const POLICY_FILE: &str = "policy.csv";
pub const OPTIONS_DIR: &str = "options";

pub fn option_stem(dir: &Path, (src, tgt): (usize, usize)) -> PathBuf {
    dir.join(OPTIONS_DIR).join(format!("edge_{src}_{tgt}"))
}

pub fn save_options(dir: &Path, edges: &[(usize, usize)], options: &[OptionPolicy]) -> Result<()> {
    if edges.len() != options.len() {
        return Err(Error::Mismatch(format!("{} options for {} edges", options.len(), edges.len())));
    }
    let odir = dir.join(OPTIONS_DIR);
    std::fs::create_dir_all(&odir).map_err(|e| Error::io(&odir, e))?;
    for (&e, p) in edges.iter().zip(options) {
        p.save(&option_stem(dir, e))?;
    }
    Ok(())
}

/// Loads one policy per edge; edges without files yield `None` with a warning.
pub fn load_options(dir: &Path, edges: &[(usize, usize)]) -> Result<Vec<Option<OptionPolicy>>> {
    edges
        .iter()
        .map(|&e| {
            let stem = option_stem(dir, e);
            if !stem.with_extension("bin").exists() {
                log::warn!("no option for edge {e:?} in {}, edge dropped", dir.display());
                return Ok(None);
            }
            OptionPolicy::load(&stem).map(Some)
        })
        .collect()
}

pub fn policy_to_csv(policy: &AbstractPolicy, options: &[(usize, usize)]) -> String {
    let kind = match policy.kind {
        PolicyKind::Conservative => "conservative",
        PolicyKind::Expected => "expected",
    };
    let mut out = format!("# kind={kind}\nregion,option,source,target\n");
    for (r, c) in policy.choice.iter().enumerate() {
        match c {
            Some(o) => {
                let (s, t) = options[*o];
                let _ = writeln!(out, "{r},{o},{s},{t}");
            }
            None => {
                let _ = writeln!(out, "{r},,,");
            }
        }
    }
    out
}

pub fn policy_from_csv(text: &str, options: &[(usize, usize)]) -> Result<AbstractPolicy> {
    let bad = |d: String| Error::parse("abstract policy", d);
    let mut lines = text.lines();
    let kind = match lines.next().and_then(|l| l.strip_prefix("# kind=")) {
        Some("conservative") => PolicyKind::Conservative,
        Some("expected") => PolicyKind::Expected,
        other => return Err(bad(format!("bad header {other:?}"))),
    };
    if lines.next() != Some("region,option,source,target") {
        return Err(bad("missing column header".into()));
    }
    let mut choice = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 || f[0].parse::<usize>().ok() != Some(i) {
            return Err(bad(format!("malformed row {line:?}")));
        }
        if f[1].is_empty() {
            choice.push(None);
            continue;
        }
        let o: usize = f[1].parse().map_err(|e| bad(format!("{line:?}: {e}")))?;
        let (s, t): (usize, usize) = (
            f[2].parse().map_err(|e| bad(format!("{line:?}: {e}")))?,
            f[3].parse().map_err(|e| bad(format!("{line:?}: {e}")))?,
        );
        if options.get(o) != Some(&(s, t)) {
            return Err(Error::Mismatch(format!("option {o} is not edge ({s}, {t})")));
        }
        choice.push(Some(o));
    }
    Ok(AbstractPolicy { choice, kind })
}

/// A trained run loaded back from disk.
pub struct Artifacts {
    pub spec: AbstractSpec,
    pub options: Vec<Option<OptionPolicy>>,
    pub policy: Option<AbstractPolicy>,
}

pub fn save_artifacts(
    dir: &Path,
    spec: &AbstractSpec,
    options: &[OptionPolicy],
    policy: &AbstractPolicy,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    spec.save(&dir.join(SPEC_FILE))?;
    let edges = spec.edge_list();
    save_options(dir, &edges, options)?;
    let path = dir.join(POLICY_FILE);
    std::fs::write(&path, policy_to_csv(policy, &edges)).map_err(|e| Error::io(&path, e))
}

pub fn load_artifacts(dir: &Path) -> Result<Artifacts> {
    let spec = AbstractSpec::load(&dir.join(SPEC_FILE))?;
    let edges = spec.edge_list();
    let options = load_options(dir, &edges)?;
    let path = dir.join(POLICY_FILE);
    let policy = if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let p = policy_from_csv(&text, &edges)?;
        if p.choice.len() != spec.n_regions() {
            return Err(Error::Mismatch(format!(
                "policy covers {} regions, spec has {}",
                p.choice.len(),
                spec.n_regions()
            )));
        }
        Some(p)
    } else {
        None
    };
    Ok(Artifacts { spec, options, policy })
}

impl Artifacts {
    /// Checks that every option and region matches `env`'s state space.
    pub fn check_env<E: Environment + ?Sized>(&self, env: &E) -> Result<()> {
        let dim = env.state_dim();
        for (o, p) in self.options.iter().enumerate() {
            if let Some(p) = p {
                if p.net.input_dim() != dim || p.norm.mean.len() != dim {
                    return Err(Error::Mismatch(format!(
                        "option {o} expects {}-dimensional states, environment has {dim}",
                        p.net.input_dim()
                    )));
                }
            }
        }
        if let Some(r) = self.spec.regions.iter().find(|r| r.center.len() != dim) {
            return Err(Error::Mismatch(format!("region {} has dimension {}", r.id, r.center.len())));
        }
        Ok(())
    }
}
