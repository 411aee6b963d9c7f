use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};

use crate::manifest::{digest, RunManifest};
use crate::Failure;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory that receives the re-generated outputs.
    #[arg(long)]
    out_dir: PathBuf,
}

fn relocate(path: &Path, dir: &Path) -> Result<PathBuf> {
    let name = path.file_name().with_context(|| format!("output path {} has no file name", path.display()))?;
    Ok(dir.join(name))
}

pub fn run(a: Args) -> Result<()> {
    let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.manifest.display()))?;
    for input in &m.inputs {
        let now = digest(&input.path)?;
        if now.sha256 != input.sha256 {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let moved: Vec<(String, PathBuf)> = m
        .outputs
        .iter()
        .map(|o| Ok((o.path.to_string_lossy().into_owned(), relocate(&o.path, &a.out_dir)?)))
        .collect::<Result<_>>()?;
    // Sibling manifests are rewritten too, so the replay never overwrites
    // the original.
    let manifest_arg = m
        .command
        .iter()
        .position(|s| s == "--manifest")
        .and_then(|i| m.command.get(i + 1))
        .or_else(|| m.command.iter().find(|s| s.starts_with("--manifest=")));
    let rewrite = |value: &str| -> Result<Option<PathBuf>> {
        if let Some((_, to)) = moved.iter().find(|(from, _)| from == value) {
            return Ok(Some(to.clone()));
        }
        if manifest_arg.is_some_and(|m| m == value) || manifest_arg.is_some_and(|m| m == &format!("--manifest={value}")) {
            return Ok(Some(relocate(Path::new(value), &a.out_dir)?));
        }
        Ok(None)
    };
    let mut args: Vec<OsString> = Vec::with_capacity(m.command.len());
    for s in &m.command {
        if let Some(to) = rewrite(s)? {
            args.push(to.into_os_string());
        } else if let Some((flag, value)) = s.split_once('=').filter(|(f, _)| f.starts_with("--")) {
            match rewrite(value)? {
                Some(to) => args.push(format!("{flag}={}", to.display()).into()),
                None => args.push(s.into()),
            }
        } else {
            args.push(s.into());
        }
    }

    let exe = std::env::current_exe().context("locating the executable")?;
    let status = Command::new(exe)
        .args(&args)
        .env_remove("IMAGESET_SEED")
        .status()
        .context("running the recorded command")?;
    log::info!("replay exited with {status}");

    let mut mismatches = 0;
    for (orig, (_, new)) in m.outputs.iter().zip(&moved) {
        let d = match digest(new) {
            Ok(d) => d.sha256,
            Err(_) => "missing".into(),
        };
        let same = d == orig.sha256;
        println!("{} {}", if same { "identical" } else { "DIFFERS  " }, orig.path.display());
        if !same {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        return Err(Failure(format!("{mismatches} of {} outputs differ", m.outputs.len())).into());
    }
    Ok(())
}
