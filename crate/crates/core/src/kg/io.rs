//! TAB-separated dataset files: `train.txt`, `valid.txt`, `test.txt`
//! (`head\trelation\ttail` per line) and optional `entities.dict` /
//! `relations.dict` (`id\tname` per line).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{KnowledgeGraph, Triple, Vocab};
use crate::error::{Error, Result};

pub const SPLIT_FILES: [&str; 3] = ["train.txt", "valid.txt", "test.txt"];
const ENTITY_DICT: &str = "entities.dict";
const RELATION_DICT: &str = "relations.dict";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Ignore dict files even when present.
    pub ignore_dicts: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_owned(),
        source,
    })
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

fn read_dict(path: &Path) -> Result<Vocab> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (line, l) in lines(&text) {
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let (id, name) = l
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `id<TAB>name`".into()))?;
        let id: usize = id
            .parse()
            .map_err(|_| parse_err(format!("invalid id `{id}`")))?;
        if id != rows.len() {
            return Err(parse_err(format!("expected id {}, found {id}", rows.len())));
        }
        rows.push(name.to_owned());
    }
    Vocab::from_names(rows)
}

fn parse_triples(
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
    fixed_vocab: bool,
) -> Result<Vec<Triple>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, l) in lines(&text) {
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected 3 TAB-separated fields, found {}", fields.len()),
            });
        }
        let lookup = |vocab: &mut Vocab, name: &str, kind: &str| -> Result<u32> {
            if fixed_vocab {
                vocab.get(name).ok_or_else(|| {
                    Error::Vocabulary(format!(
                        "{}:{line}: unknown {kind} `{name}`",
                        path.display()
                    ))
                })
            } else {
                Ok(vocab.intern(name))
            }
        };
        let head = lookup(entities, fields[0], "entity")?;
        let rel = lookup(relations, fields[1], "relation")?;
        let tail = lookup(entities, fields[2], "entity")?;
        out.push(Triple::new(head, rel, tail));
    }
    Ok(out)
}

/// Loads a dataset directory with default options.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    load_dataset_with(dir, LoadOptions::default())
}

pub fn load_dataset_with(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<KnowledgeGraph> {
    let dir = dir.as_ref();
    let ent_dict = dir.join(ENTITY_DICT);
    let rel_dict = dir.join(RELATION_DICT);
    let fixed = !opts.ignore_dicts && ent_dict.is_file() && rel_dict.is_file();
    let (mut entities, mut relations) = if fixed {
        (read_dict(&ent_dict)?, read_dict(&rel_dict)?)
    } else {
        (Vocab::new(), Vocab::new())
    };
    let mut splits = Vec::with_capacity(3);
    for file in SPLIT_FILES {
        splits.push(parse_triples(&dir.join(file), &mut entities, &mut relations, fixed)?);
    }
    let test = splits.pop().unwrap_or_default();
    let valid = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    KnowledgeGraph::new(entities, relations, train, valid, test)
}

/// Writes the original (non-inverse) facts of `kg` back out in the
/// dataset format, optionally with dict files.
pub fn save_dataset(kg: &KnowledgeGraph, dir: impl AsRef<Path>, with_dicts: bool) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let base = kg.num_base_relations() as u32;
    for (file, (_, triples)) in SPLIT_FILES.iter().zip(kg.splits()) {
        let path: PathBuf = dir.join(file);
        let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
        for t in triples.iter().filter(|t| t.rel < base) {
            writeln!(
                w,
                "{}\t{}\t{}",
                kg.entities().name(t.head).unwrap_or_default(),
                kg.relations().name(t.rel).unwrap_or_default(),
                kg.entities().name(t.tail).unwrap_or_default()
            )?;
        }
        w.flush()?;
    }
    if with_dicts {
        let write_dict = |path: PathBuf, names: &[String]| -> Result<()> {
            let mut w = std::io::BufWriter::new(fs::File::create(path)?);
            for (i, n) in names.iter().enumerate() {
                writeln!(w, "{i}\t{n}")?;
            }
            w.flush()?;
            Ok(())
        };
        write_dict(dir.join(ENTITY_DICT), kg.entities().names())?;
        write_dict(
            dir.join(RELATION_DICT),
            &kg.relations().names()[..kg.num_base_relations()],
        )?;
    }
    Ok(())
}
