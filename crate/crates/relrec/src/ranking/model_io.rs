//! Ranking-model file format: versioned header, schema (country vocabulary
//! + fingerprint), training metadata, then the variant payload.
//!
//! The reader is strict: size caps, finite values, and child-index
//! monotonicity (children always follow their parent, so traversal cannot
//! loop). The schema fingerprint stored in the file must equal the
//! fingerprint of the schema rebuilt from the stored countries — a model
//! written against a different feature layout refuses to load.

use super::features::FeatureSchema;
use super::gbdt::{Node, Tree};
use super::{ModelVariant, Objective, RankingModel, TrainMeta};
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 4] = b"RRMD";
const MODEL_VERSION: u16 = 1;
const MAX_COUNTRIES: u32 = 100_000;
const MAX_STR: usize = 4096;
const MAX_DIM: u32 = 1 << 20;
const MAX_TREES: u32 = 100_000;
const MAX_NODES: u32 = 1 << 20;

pub fn write_model(model: &RankingModel, schema: &FeatureSchema, path: &Path) -> Result<()> {
    if model.fingerprint != schema.fingerprint() {
        return Err(Error::SchemaMismatch {
            model: model.fingerprint,
            extractor: schema.fingerprint(),
        });
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_u16::<LittleEndian>(MODEL_VERSION)?;
    w.write_u64::<LittleEndian>(model.fingerprint)?;
    w.write_u32::<LittleEndian>(schema.countries().len() as u32)?;
    for c in schema.countries() {
        write_str(&mut w, c)?;
    }
    match model.meta.trained_ts_range {
        Some((lo, hi)) => {
            w.write_u8(1)?;
            w.write_i64::<LittleEndian>(lo)?;
            w.write_i64::<LittleEndian>(hi)?;
        }
        None => w.write_u8(0)?,
    }
    w.write_u64::<LittleEndian>(model.meta.seed)?;
    write_str(&mut w, &model.meta.config_tag)?;
    w.write_u8(match model.objective {
        Objective::RankSvm => 0,
        Objective::RankNet => 1,
        Objective::Logistic => 2,
    })?;
    match &model.variant {
        ModelVariant::Linear { weights } => {
            w.write_u8(0)?;
            w.write_u32::<LittleEndian>(weights.len() as u32)?;
            for v in weights {
                w.write_f64::<LittleEndian>(*v)?;
            }
        }
        ModelVariant::Gbdt { trees, shrinkage } => {
            w.write_u8(1)?;
            w.write_f64::<LittleEndian>(*shrinkage)?;
            w.write_u32::<LittleEndian>(trees.len() as u32)?;
            for tree in trees {
                w.write_u32::<LittleEndian>(tree.node_count() as u32)?;
                for node in tree.nodes() {
                    match node {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.write_u8(0)?;
                            w.write_u32::<LittleEndian>(*feature)?;
                            w.write_f64::<LittleEndian>(*threshold)?;
                            w.write_u32::<LittleEndian>(*left)?;
                            w.write_u32::<LittleEndian>(*right)?;
                        }
                        Node::Leaf { value } => {
                            w.write_u8(1)?;
                            w.write_f64::<LittleEndian>(*value)?;
                        }
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > MAX_STR {
        return Err(Error::invalid("string too long for model file"));
    }
    w.write_u16::<LittleEndian>(bytes.len() as u16)?;
    w.write_all(bytes)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(RankingModel, FeatureSchema)> {
    let file = std::fs::File::open(path)?;
    read_model_from(BufReader::new(file))
}

pub fn read_model_from<R: Read>(mut r: R) -> Result<(RankingModel, FeatureSchema)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::corrupt("model: short magic"))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::corrupt("model: bad magic"));
    }
    if read_u16(&mut r)? != MODEL_VERSION {
        return Err(Error::corrupt("model: unsupported version"));
    }
    let fingerprint = read_u64(&mut r)?;
    let n_countries = read_u32(&mut r)?;
    if n_countries > MAX_COUNTRIES {
        return Err(Error::corrupt("model: country count exceeds cap"));
    }
    let mut countries = Vec::with_capacity(n_countries as usize);
    for _ in 0..n_countries {
        countries.push(read_str(&mut r)?);
    }
    let schema = FeatureSchema::build(&countries);
    if schema.fingerprint() != fingerprint {
        return Err(Error::corrupt(
            "model: schema fingerprint does not match feature layout",
        ));
    }
    let trained_ts_range = match read_u8(&mut r)? {
        0 => None,
        1 => {
            let lo = read_i64(&mut r)?;
            let hi = read_i64(&mut r)?;
            Some((lo, hi))
        }
        _ => return Err(Error::corrupt("model: bad range flag")),
    };
    let seed = read_u64(&mut r)?;
    let config_tag = read_str(&mut r)?;
    let objective = match read_u8(&mut r)? {
        0 => Objective::RankSvm,
        1 => Objective::RankNet,
        2 => Objective::Logistic,
        _ => return Err(Error::corrupt("model: bad objective")),
    };
    let variant = match read_u8(&mut r)? {
        0 => {
            let dim = read_u32(&mut r)?;
            if dim > MAX_DIM {
                return Err(Error::corrupt("model: weight dim exceeds cap"));
            }
            if dim as usize != schema.dim() {
                return Err(Error::corrupt("model: weight dim does not match schema"));
            }
            let mut weights = Vec::with_capacity(dim as usize);
            for _ in 0..dim {
                weights.push(read_finite(&mut r)?);
            }
            ModelVariant::Linear { weights }
        }
        1 => {
            let shrinkage = read_finite(&mut r)?;
            let n_trees = read_u32(&mut r)?;
            if n_trees > MAX_TREES {
                return Err(Error::corrupt("model: tree count exceeds cap"));
            }
            let mut trees = Vec::with_capacity(n_trees as usize);
            for _ in 0..n_trees {
                trees.push(read_tree(&mut r, schema.dim() as u32)?);
            }
            ModelVariant::Gbdt { trees, shrinkage }
        }
        _ => return Err(Error::corrupt("model: bad variant")),
    };
    Ok((
        RankingModel {
            variant,
            objective,
            fingerprint,
            meta: TrainMeta {
                trained_ts_range,
                config_tag,
                seed,
            },
        },
        schema,
    ))
}

fn read_tree<R: Read>(r: &mut R, max_feature: u32) -> Result<Tree> {
    let n_nodes = read_u32(r)?;
    if n_nodes == 0 || n_nodes > MAX_NODES {
        return Err(Error::corrupt("model: bad node count"));
    }
    let mut nodes = Vec::with_capacity(n_nodes as usize);
    for i in 0..n_nodes {
        match read_u8(r)? {
            0 => {
                let feature = read_u32(r)?;
                if feature >= max_feature {
                    return Err(Error::corrupt("model: split feature out of schema"));
                }
                let threshold = read_finite(r)?;
                let left = read_u32(r)?;
                let right = read_u32(r)?;
                // Children strictly after the parent: traversal terminates.
                if left <= i || right <= i || left >= n_nodes || right >= n_nodes {
                    return Err(Error::corrupt("model: non-monotone tree links"));
                }
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
            }
            1 => nodes.push(Node::Leaf {
                value: read_finite(r)?,
            }),
            _ => return Err(Error::corrupt("model: bad node kind")),
        }
    }
    Ok(Tree::from_nodes(nodes))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    r.read_u8().map_err(|_| Error::corrupt("model: truncated"))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    r.read_u16::<LittleEndian>()
        .map_err(|_| Error::corrupt("model: truncated"))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| Error::corrupt("model: truncated"))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    r.read_u64::<LittleEndian>()
        .map_err(|_| Error::corrupt("model: truncated"))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    r.read_i64::<LittleEndian>()
        .map_err(|_| Error::corrupt("model: truncated"))
}

fn read_finite<R: Read>(r: &mut R) -> Result<f64> {
    let v = r
        .read_f64::<LittleEndian>()
        .map_err(|_| Error::corrupt("model: truncated"))?;
    if !v.is_finite() {
        return Err(Error::corrupt("model: non-finite value"));
    }
    Ok(v)
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u16(r)? as usize;
    if len > MAX_STR {
        return Err(Error::corrupt("model: string too long"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::corrupt("model: truncated"))?;
    String::from_utf8(buf).map_err(|_| Error::corrupt("model: string not utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::gbdt::{train_gbdt, GbdtParams, GbdtTrainingData};

    fn toy_model(schema: &FeatureSchema) -> RankingModel {
        let dim = schema.dim();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let mut row = vec![0.0; dim];
            row[0] = (i % 3) as f64;
            row[1] = (i % 2) as f64;
            features.push(row);
            labels.push(i % 2 == 0);
        }
        let data = GbdtTrainingData::Logistic {
            features,
            labels,
            fingerprint: schema.fingerprint(),
        };
        let hp = GbdtParams {
            num_trees: 5,
            max_depth: 2,
            min_leaf_count: 2,
            ..GbdtParams::default()
        };
        train_gbdt(&data, &hp, 0).unwrap()
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        let schema = FeatureSchema::build(&["de".into(), "us".into()]);
        let mut model = toy_model(&schema);
        model.meta.trained_ts_range = Some((100, 200));
        model.meta.config_tag = "v4_session_logistic".to_string();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_model(&model, &schema, tmp.path()).unwrap();
        let (loaded, loaded_schema) = read_model(tmp.path()).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_schema, schema);
    }

    #[test]
    fn reader_rejects_fingerprint_drift() {
        let schema = FeatureSchema::build(&[]);
        let model = toy_model(&schema);
        let tmp = tempfile::NamedTempFile::new().unwrap();
        write_model(&model, &schema, tmp.path()).unwrap();
        let mut bytes = std::fs::read(tmp.path()).unwrap();
        // Corrupt the stored fingerprint.
        bytes[6] ^= 0xff;
        assert!(read_model_from(&bytes[..]).is_err());
    }

    #[test]
    fn reader_rejects_garbage() {
        assert!(read_model_from(&b""[..]).is_err());
        assert!(read_model_from(&b"RRMDxx"[..]).is_err());
    }
}
