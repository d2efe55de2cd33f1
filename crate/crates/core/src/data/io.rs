use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use nalgebra::DMatrix;

use super::{DataMatrix, LabelVector};
use crate::error::{Result, SparcaError};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a comma-separated numeric table.
///
/// Lines starting with `#` are ignored. When `label_column` is given that
/// column is split off as integer class labels and the remaining columns form
/// the matrix.
pub fn load_csv(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<(DataMatrix, Option<LabelVector>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SparcaError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut n_rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SparcaError::parse(path, e.to_string()))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if let Some(lc) = label_column {
            if lc >= record.len() {
                return Err(SparcaError::parse(
                    path,
                    format!("line {line}: label column {lc} out of range"),
                ));
            }
        }
        let w = record.len() - usize::from(label_column.is_some());
        if *width.get_or_insert(w) != w {
            return Err(SparcaError::parse(path, format!("line {line}: ragged row")));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                SparcaError::parse(path, format!("line {line}: non-numeric cell {cell:?}"))
            })?;
            if Some(j) == label_column {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(SparcaError::parse(
                        path,
                        format!("line {line}: label {cell:?} is not a class id"),
                    ));
                }
                labels.push(v as usize);
            } else {
                values.push(v);
            }
        }
        n_rows += 1;
    }
    let width = match width {
        Some(w) if n_rows > 0 && w > 0 => w,
        _ => return Err(SparcaError::parse(path, "no data rows")),
    };
    let matrix = DataMatrix::new(DMatrix::from_row_slice(n_rows, width, &values))?;
    Ok((matrix, label_column.map(|_| LabelVector::new(labels))))
}

/// Writes a matrix as CSV with optional `#` comment lines and header row.
///
/// Values use the shortest decimal form that parses back to the same `f64`.
pub fn write_csv(
    path: impl AsRef<Path>,
    values: &DMatrix<f64>,
    header: Option<&[String]>,
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SparcaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        if let Some(h) = header {
            writeln!(w, "{}", h.join(","))?;
        }
        let mut line = String::new();
        for i in 0..values.nrows() {
            line.clear();
            for j in 0..values.ncols() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&values[(i, j)].to_string());
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    };
    write().map_err(|e| SparcaError::io(path, e))
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| SparcaError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| SparcaError::parse(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| SparcaError::parse(path, "truncated IDX header"))
}

/// Loads an MNIST-layout IDX image/label pair. Files may be gzip-compressed.
///
/// Each image is flattened row-major into one matrix row of raw pixel
/// intensities in `[0, 255]`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(DataMatrix, LabelVector)> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_maybe_gz(images_path)?;
    let labels = read_maybe_gz(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(SparcaError::parse(
            images_path,
            format!("bad IDX image magic {magic:#010x}"),
        ));
    }
    let n = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let pixels = rows * cols;
    let body = &images[16..];
    if body.len() < n * pixels {
        return Err(SparcaError::parse(
            images_path,
            format!("truncated: {n} images need {} bytes, found {}", n * pixels, body.len()),
        ));
    }

    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(SparcaError::parse(
            labels_path,
            format!("bad IDX label magic {magic:#010x}"),
        ));
    }
    let n_labels = be_u32(&labels, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(SparcaError::parse(
            labels_path,
            format!("{n_labels} labels for {n} images"),
        ));
    }
    let label_body = &labels[8..];
    if label_body.len() < n {
        return Err(SparcaError::parse(labels_path, "truncated label data"));
    }

    let matrix = DMatrix::from_fn(n, pixels, |i, j| f64::from(body[i * pixels + j]));
    let label_vec = LabelVector::new(label_body[..n].iter().map(|&b| b as usize).collect());
    Ok((DataMatrix::new(matrix)?, label_vec))
}
