//! Tab-separated file formats. Lines starting with `#` and blank lines are
//! skipped everywhere.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Alignment, DatasetBundle, IdMap, Interaction, RawInteraction, RawTriple, Split, Triple};
use crate::error::{MkrError, Result};

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const KG_FILE: &str = "kg.tsv";
pub const ALIGNMENT_FILE: &str = "alignment.tsv";
pub const SPLITS_FILE: &str = "splits.tsv";
const MAP_FILES: [&str; 4] = ["users.tsv", "items.tsv", "entities.tsv", "relations.tsv"];

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> MkrError {
    MkrError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// `(line number, fields)` for every data line.
fn rows(path: &Path, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|f| f.trim().to_string()).collect();
        if fields.len() != columns {
            return Err(parse_err(
                path,
                k + 1,
                format!("expected {columns} tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(path, k + 1, "empty field"));
        }
        out.push((k + 1, fields));
    }
    Ok(out)
}

/// Raw ratings: `user⟨TAB⟩item⟨TAB⟩rating`.
pub fn read_ratings(path: &Path) -> Result<Vec<RawInteraction>> {
    rows(path, 3)?
        .into_iter()
        .map(|(line, f)| {
            let rating: f64 = f[2]
                .parse()
                .map_err(|_| parse_err(path, line, format!("rating `{}` is not a number", f[2])))?;
            if !rating.is_finite() {
                return Err(parse_err(path, line, "rating is not finite"));
            }
            Ok(RawInteraction {
                user: f[0].clone(),
                item: f[1].clone(),
                rating,
            })
        })
        .collect()
}

/// Triples: `head⟨TAB⟩relation⟨TAB⟩tail`.
pub fn read_kg(path: &Path) -> Result<Vec<RawTriple>> {
    Ok(rows(path, 3)?
        .into_iter()
        .map(|(_, f)| RawTriple {
            head: f[0].clone(),
            relation: f[1].clone(),
            tail: f[2].clone(),
        })
        .collect())
}

/// Alignment: `item⟨TAB⟩entity`, any number of rows per item.
pub fn read_alignment(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(rows(path, 2)?
        .into_iter()
        .map(|(_, f)| (f[0].clone(), f[1].clone()))
        .collect())
}

fn parse_id(path: &Path, line: usize, field: &str, bound: usize) -> Result<usize> {
    let id: usize = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{field}` is not a dense id")))?;
    if id >= bound {
        return Err(parse_err(path, line, format!("id {id} out of range (< {bound})")));
    }
    Ok(id)
}

fn read_map(path: &Path) -> Result<IdMap> {
    let mut map = IdMap::new();
    for (line, f) in rows(path, 2)? {
        let id = parse_id(path, line, &f[0], usize::MAX)?;
        if id != map.len() {
            return Err(parse_err(path, line, format!("expected id {}, found {id}", map.len())));
        }
        if map.get(&f[1]).is_some() {
            return Err(parse_err(path, line, format!("raw id `{}` mapped twice", f[1])));
        }
        map.intern(&f[1]);
    }
    Ok(map)
}

fn create(dir: &Path, name: &str, header: &str) -> Result<BufWriter<fs::File>> {
    let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
    writeln!(w, "# {header}")?;
    Ok(w)
}

impl DatasetBundle {
    /// Writes the bundle as a directory of TSV files with dense ids, the
    /// split assignment and one remapping table per id space.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = create(dir, INTERACTIONS_FILE, "user_id\titem_id\tlabel")?;
        for r in &self.interactions {
            writeln!(w, "{}\t{}\t{}", r.user, r.item, r.label)?;
        }
        w.flush()?;

        let mut w = create(dir, KG_FILE, "head_id\trelation_id\ttail_id")?;
        for t in &self.triples {
            writeln!(w, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
        }
        w.flush()?;

        let mut w = create(dir, ALIGNMENT_FILE, "item_id\tentity_id")?;
        for (i, e) in self.alignment.pairs() {
            writeln!(w, "{i}\t{e}")?;
        }
        w.flush()?;

        let mut w = create(dir, SPLITS_FILE, "kind\tindex\tsplit")?;
        for (k, s) in self.interaction_split.iter().enumerate() {
            writeln!(w, "interaction\t{k}\t{}", s.as_str())?;
        }
        for (k, s) in self.triple_split.iter().enumerate() {
            writeln!(w, "triple\t{k}\t{}", s.as_str())?;
        }
        w.flush()?;

        for (file, map) in MAP_FILES.iter().zip([&self.users, &self.items, &self.entities, &self.relations]) {
            let mut w = create(dir, file, "dense_id\traw_id")?;
            for (k, name) in map.names().iter().enumerate() {
                writeln!(w, "{k}\t{name}")?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let [users, items, entities, relations] = MAP_FILES.map(|f| read_map(&dir.join(f)));
        let (users, items, entities, relations) = (users?, items?, entities?, relations?);

        let path = dir.join(INTERACTIONS_FILE);
        let mut interactions = Vec::new();
        for (line, f) in rows(&path, 3)? {
            let label = parse_id(&path, line, &f[2], 2)? as u8;
            interactions.push(Interaction {
                user: parse_id(&path, line, &f[0], users.len())?,
                item: parse_id(&path, line, &f[1], items.len())?,
                label,
            });
        }

        let path = dir.join(KG_FILE);
        let mut triples = Vec::new();
        for (line, f) in rows(&path, 3)? {
            triples.push(Triple {
                head: parse_id(&path, line, &f[0], entities.len())?,
                relation: parse_id(&path, line, &f[1], relations.len())?,
                tail: parse_id(&path, line, &f[2], entities.len())?,
            });
        }

        let path = dir.join(ALIGNMENT_FILE);
        let mut pairs = Vec::new();
        for (line, f) in rows(&path, 2)? {
            pairs.push((
                parse_id(&path, line, &f[0], items.len())?,
                parse_id(&path, line, &f[1], entities.len())?,
            ));
        }
        let alignment = Alignment::from_pairs(items.len(), entities.len(), &pairs)?;

        let path = dir.join(SPLITS_FILE);
        let mut interaction_split = vec![None; interactions.len()];
        let mut triple_split = vec![None; triples.len()];
        for (line, f) in rows(&path, 3)? {
            let split = Split::parse(&f[2]).ok_or_else(|| parse_err(&path, line, format!("unknown split `{}`", f[2])))?;
            let target = match f[0].as_str() {
                "interaction" => &mut interaction_split,
                "triple" => &mut triple_split,
                other => return Err(parse_err(&path, line, format!("unknown record kind `{other}`"))),
            };
            let k = parse_id(&path, line, &f[1], target.len())?;
            target[k] = Some(split);
        }
        let complete = |v: Vec<Option<Split>>, what: &str| -> Result<Vec<Split>> {
            v.into_iter()
                .enumerate()
                .map(|(k, s)| s.ok_or_else(|| MkrError::data(format!("{what} {k} has no split assignment"))))
                .collect()
        };
        let bundle = DatasetBundle {
            users,
            items,
            entities,
            relations,
            interactions,
            triples,
            alignment,
            interaction_split: complete(interaction_split, "interaction")?,
            triple_split: complete(triple_split, "triple")?,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}
