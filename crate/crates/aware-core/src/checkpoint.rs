//! Model checkpoints: a JSON header (config, schema, shapes) followed by
//! the parameter matrices as little-endian 64-bit floats in declaration
//! order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributeSchema;
use crate::model::{AwareConfig, AwareParams};
use crate::tensor::Matrix;

const MAGIC: &[u8; 8] = b"AWRMDL01";

#[derive(Serialize, Deserialize)]
struct Header {
    config: AwareConfig,
    schema: AttributeSchema,
    shapes: Vec<(usize, usize)>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &AwareParams<f64>,
    config: &AwareConfig,
    schema: &AttributeSchema,
) -> Result<()> {
    let roles = params.roles();
    let shapes: Vec<(usize, usize)> = roles.iter().map(|&r| params.get(r).shape()).collect();
    let header = serde_json::to_vec(&Header {
        config: config.clone(),
        schema: schema.clone(),
        shapes,
    })?;
    let mut out = Vec::with_capacity(header.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for role in roles {
        for &x in params.get(role).data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(AwareParams<f64>, AwareConfig, AttributeSchema)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() < 16 + header_len {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])?;
    header.config.validate()?;

    // Reconstruct an empty parameter set with the declared layout, then
    // fill matrices in declaration order.
    let class_count = match header.config.task_kind {
        crate::graph::TaskKind::MulticlassClassification => header
            .shapes
            .last()
            .map(|&(r, _)| r)
            .unwrap_or(2),
        _ => 2,
    };
    let mut params = AwareParams::<f64>::init(&header.config, &header.schema, class_count, 0)?;
    let roles = params.roles();
    if roles.len() != header.shapes.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter blocks, header lists {}",
            roles.len(),
            header.shapes.len()
        )));
    }
    let mut offset = 16 + header_len;
    for (role, &(rows, cols)) in roles.iter().zip(header.shapes.iter()) {
        let need = rows * cols * 8;
        if bytes.len() < offset + need {
            return Err(Error::Checkpoint("truncated parameter data".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            let start = offset + i * 8;
            data.push(f64::from_le_bytes(
                bytes[start..start + 8].try_into().expect("8 bytes"),
            ));
        }
        *params.get_mut(*role) = Matrix::from_vec(rows, cols, data)?;
        offset += need;
    }
    if offset != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok((params, header.config, header.schema))
}
