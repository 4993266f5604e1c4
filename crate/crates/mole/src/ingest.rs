//! Loading papers from LaTeX sources, plain text and PDFs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use mole_core::{Document, SourceFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    Latex,
    Text,
    Pdf,
}

impl InputFormat {
    pub fn detect(path: &Path) -> Option<InputFormat> {
        if path.is_dir() {
            return Some(InputFormat::Latex);
        }
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "tex" => Some(InputFormat::Latex),
            "txt" | "md" => Some(InputFormat::Text),
            "pdf" => Some(InputFormat::Pdf),
            _ => None,
        }
    }
}

pub fn paper_id(path: &Path) -> String {
    let stem = if path.is_dir() { path.file_name() } else { path.file_stem() };
    stem.map_or_else(|| "paper".to_owned(), |s| s.to_string_lossy().into_owned())
}

/// Expands directories into their paper entries: a directory holding `.tex`
/// files is one paper, anything else is scanned one level deep.
pub fn discover(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
        if p.is_dir() && !has_tex(p)? {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_dir() || InputFormat::detect(e).is_some())
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn has_tex(dir: &Path) -> Result<bool> {
    Ok(tex_files(dir)?.next().is_some())
}

fn tex_files(dir: &Path) -> Result<impl Iterator<Item = PathBuf>> {
    Ok(fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("tex"))))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Concatenates a LaTeX project: the file containing `\begin{document}`
/// first, then the remaining `.tex` files in name order.
pub fn read_latex_dir(dir: &Path) -> Result<String> {
    let mut files: Vec<PathBuf> = tex_files(dir)?.collect();
    if files.is_empty() {
        bail!("no .tex files in {}", dir.display());
    }
    files.sort();
    let mut texts = files
        .iter()
        .map(|f| Ok((f, read_text(f)?)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(main) = texts.iter().position(|(_, t)| t.contains("\\begin{document}")) {
        let m = texts.remove(main);
        texts.insert(0, m);
    }
    Ok(texts.into_iter().map(|(_, t)| t).collect::<Vec<_>>().join("\n"))
}

/// Runs `cmd` with `{in}` and `{out}` replaced by paths and reads the output file.
pub fn extract_pdf(path: &Path, cmd: &str) -> Result<String> {
    let tmp = std::env::temp_dir().join(format!("mole-{}-{}.txt", std::process::id(), paper_id(path)));
    let line = cmd
        .replace("{in}", &path.to_string_lossy())
        .replace("{out}", &tmp.to_string_lossy());
    let mut parts = line.split_whitespace();
    let program = parts.next().context("empty PDF extraction command")?;
    let status = Command::new(program)
        .args(parts)
        .status()
        .with_context(|| format!("running `{line}`"))?;
    if !status.success() {
        bail!("`{line}` exited with {status}");
    }
    let text = read_text(&tmp);
    let _ = fs::remove_file(&tmp);
    text
}

pub fn load_document(path: &Path, format: Option<InputFormat>, pdf_cmd: Option<&str>) -> Result<Document> {
    let format = match format {
        Some(f) => f,
        None => InputFormat::detect(path)
            .with_context(|| format!("cannot tell the format of {}; pass --format", path.display()))?,
    };
    let id = paper_id(path);
    let (source, text) = match format {
        InputFormat::Latex if path.is_dir() => (SourceFormat::Latex, read_latex_dir(path)?),
        InputFormat::Latex => (SourceFormat::Latex, read_text(path)?),
        InputFormat::Text => (SourceFormat::PlainText, read_text(path)?),
        InputFormat::Pdf => {
            let cmd = pdf_cmd.context("PDF input needs --pdf-extract-cmd")?;
            (SourceFormat::PlainText, extract_pdf(path, cmd)?)
        }
    };
    Ok(Document::new(id, source, &text))
}
