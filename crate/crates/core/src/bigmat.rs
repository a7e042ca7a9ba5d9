//! File-backed column-major matrices.
//!
//! A matrix lives on disk as a headerless blob of little-endian `f64` values
//! in column-major order, described by a small JSON descriptor file. Attaching
//! the descriptor memory-maps the blob, so reads are served by the page cache
//! and matrices larger than RAM can be scanned without ever loading them
//! whole. Attached matrices are immutable and cheap to share across threads;
//! row subsets are expressed as [`MatrixView`]s over the same mapping rather
//! than copies.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use memmap2::Mmap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// The on-disk format is little-endian; reads below reinterpret raw bytes.
const _: () = assert!(cfg!(target_endian = "little"));

pub const FORMAT_TAG: &str = "oocl-mat-v1";
pub const ELEMENT_TYPE: &str = "float64le";
pub const LAYOUT: &str = "column-major";

/// Default buffer for the setup-time blockwise transpose (64 MB).
pub const DEFAULT_TRANSPOSE_BUFFER: usize = 64 << 20;

/// On-disk description of a data blob. Serialized as JSON next to the blob;
/// the `data_file` path is relative to the descriptor's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub format_tag: String,
    pub n_rows: u64,
    pub n_cols: u64,
    pub element_type: String,
    pub layout: String,
    pub data_file: String,
    pub byte_offset: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col_names: Option<Vec<String>>,
}

impl Descriptor {
    pub fn new(n_rows: usize, n_cols: usize, data_file: String) -> Self {
        Descriptor {
            format_tag: FORMAT_TAG.to_string(),
            n_rows: n_rows as u64,
            n_cols: n_cols as u64,
            element_type: ELEMENT_TYPE.to_string(),
            layout: LAYOUT.to_string(),
            data_file,
            byte_offset: 0,
            col_names: None,
        }
    }

    pub fn encode(&self) -> String {
        // serde_json cannot fail on this plain struct
        serde_json::to_string_pretty(self).expect("descriptor serialization")
    }

    pub fn decode(text: &str, path: &Path) -> Result<Self> {
        let d: Descriptor = serde_json::from_str(text).map_err(|e| Error::Descriptor {
            path: path.to_path_buf(),
            msg: format!("invalid JSON: {e}"),
        })?;
        if d.format_tag != FORMAT_TAG {
            return Err(Error::Descriptor {
                path: path.to_path_buf(),
                msg: format!("unknown format tag {:?}", d.format_tag),
            });
        }
        if d.element_type != ELEMENT_TYPE {
            return Err(Error::Descriptor {
                path: path.to_path_buf(),
                msg: format!("unsupported element type {:?}", d.element_type),
            });
        }
        if d.layout != LAYOUT {
            return Err(Error::Descriptor {
                path: path.to_path_buf(),
                msg: format!("unsupported layout {:?}", d.layout),
            });
        }
        if d.byte_offset % 8 != 0 {
            return Err(Error::Descriptor {
                path: path.to_path_buf(),
                msg: "byte_offset must be a multiple of 8".into(),
            });
        }
        if let Some(names) = &d.col_names {
            if names.len() as u64 != d.n_cols {
                return Err(Error::Descriptor {
                    path: path.to_path_buf(),
                    msg: format!(
                        "{} column names for {} columns",
                        names.len(),
                        d.n_cols
                    ),
                });
            }
        }
        Ok(d)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone)]
enum Storage {
    Mapped(Arc<Mmap>),
    Owned(Arc<Vec<f64>>),
}

/// An immutable column-major `f64` matrix, either memory-mapped from disk or
/// held in memory. Cloning is cheap (shared storage).
#[derive(Clone)]
pub struct FileMatrix {
    n_rows: usize,
    n_cols: usize,
    byte_offset: usize,
    col_names: Option<Arc<Vec<String>>>,
    storage: Storage,
}

impl FileMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn col_names(&self) -> Option<&[String]> {
        self.col_names.as_deref().map(|v| v.as_slice())
    }

    pub fn col_name(&self, j: usize) -> Option<&str> {
        self.col_names.as_deref().and_then(|v| v.get(j)).map(|s| s.as_str())
    }

    /// Wrap an in-memory column-major buffer. Used by tests, the synthetic
    /// generators, and the file-vs-memory equivalence checks.
    pub fn from_dense(
        n_rows: usize,
        n_cols: usize,
        data: Vec<f64>,
        col_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Format(format!(
                "dense buffer holds {} values, expected {}x{}",
                data.len(),
                n_rows,
                n_cols
            )));
        }
        if let Some(names) = &col_names {
            if names.len() != n_cols {
                return Err(Error::Format(format!(
                    "{} column names for {n_cols} columns",
                    names.len()
                )));
            }
        }
        Ok(FileMatrix {
            n_rows,
            n_cols,
            byte_offset: 0,
            col_names: col_names.map(Arc::new),
            storage: Storage::Owned(Arc::new(data)),
        })
    }

    /// Column `j` as a contiguous slice.
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.n_cols);
        match &self.storage {
            Storage::Owned(v) => &v[j * self.n_rows..(j + 1) * self.n_rows],
            Storage::Mapped(m) => {
                let start = self.byte_offset + 8 * j * self.n_rows;
                let bytes = &m[start..start + 8 * self.n_rows];
                // Mappings are page-aligned and byte_offset is 8-aligned, so
                // the pointer is valid for f64 loads.
                debug_assert_eq!(bytes.as_ptr() as usize % 8, 0);
                unsafe {
                    std::slice::from_raw_parts(bytes.as_ptr() as *const f64, self.n_rows)
                }
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.col(j)[i]
    }

    /// Full-matrix view (all rows).
    pub fn view(&self) -> MatrixView {
        MatrixView {
            mat: self.clone(),
            rows: None,
        }
    }
}

/// An ordered row subset of a [`FileMatrix`]. All solver and CV code operates
/// on views; a view with `rows = None` is the whole matrix and reads columns
/// as contiguous slices.
#[derive(Clone)]
pub struct MatrixView {
    mat: FileMatrix,
    rows: Option<Arc<Vec<usize>>>,
}

impl MatrixView {
    pub fn matrix(&self) -> &FileMatrix {
        &self.mat
    }

    /// Logical row count.
    pub fn n(&self) -> usize {
        match &self.rows {
            Some(r) => r.len(),
            None => self.mat.n_rows(),
        }
    }

    pub fn p(&self) -> usize {
        self.mat.n_cols()
    }

    pub fn row_index(&self) -> Option<&[usize]> {
        self.rows.as_deref().map(|v| v.as_slice())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.rows {
            Some(r) => self.mat.get(r[i], j),
            None => self.mat.get(i, j),
        }
    }

    /// Apply `f(local_row, value)` over column `j`.
    #[inline]
    pub fn scan_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let col = self.mat.col(j);
        match &self.rows {
            None => {
                for (i, &x) in col.iter().enumerate() {
                    f(i, x);
                }
            }
            Some(rows) => {
                for (i, &r) in rows.iter().enumerate() {
                    f(i, col[r]);
                }
            }
        }
    }

    /// Raw dot product of column `j` with a dense vector of length `n()`.
    #[inline]
    pub fn dot(&self, j: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n());
        let col = self.mat.col(j);
        match &self.rows {
            None => col.iter().zip(v).map(|(&x, &a)| x * a).sum(),
            Some(rows) => rows.iter().zip(v).map(|(&r, &a)| col[r] * a).sum(),
        }
    }

    /// `sum_i x_ij * a_i * b_i` over the view rows.
    #[inline]
    pub fn dot2(&self, j: usize, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n());
        debug_assert_eq!(b.len(), self.n());
        let col = self.mat.col(j);
        match &self.rows {
            None => col
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&x, (&a, &b))| x * a * b)
                .sum(),
            Some(rows) => rows
                .iter()
                .zip(a.iter().zip(b))
                .map(|(&r, (&a, &b))| col[r] * a * b)
                .sum(),
        }
    }

    /// Raw dot product of columns `j` and `k` over the view rows.
    pub fn col_dot_col(&self, j: usize, k: usize) -> f64 {
        let cj = self.mat.col(j);
        let ck = self.mat.col(k);
        match &self.rows {
            None => cj.iter().zip(ck).map(|(&a, &b)| a * b).sum(),
            Some(rows) => rows.iter().map(|&r| cj[r] * ck[r]).sum(),
        }
    }

    /// Compensated (sum, sum of squares) of column `j`.
    pub fn col_sums(&self, j: usize) -> (f64, f64) {
        let mut sum = Kahan::default();
        let mut sumsq = Kahan::default();
        self.scan_col(j, |_, x| {
            sum.add(x);
            sumsq.add(x * x);
        });
        (sum.value(), sumsq.value())
    }

    /// Restrict this view further: `local_rows` index into the view's own
    /// logical rows.
    pub fn subview(&self, local_rows: &[usize]) -> Result<MatrixView> {
        validate_rows(local_rows, self.n())?;
        let abs: Vec<usize> = match &self.rows {
            None => local_rows.to_vec(),
            Some(rows) => local_rows.iter().map(|&i| rows[i]).collect(),
        };
        Ok(MatrixView {
            mat: self.mat.clone(),
            rows: Some(Arc::new(abs)),
        })
    }
}

/// Compensated accumulator (Kahan-Babuska).
#[derive(Default, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn validate_rows(rows: &[usize], n_rows: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidIndex("empty row index set".into()));
    }
    let mut prev: Option<usize> = None;
    for &r in rows {
        if r >= n_rows {
            return Err(Error::InvalidIndex(format!(
                "row index {r} out of range for {n_rows} rows"
            )));
        }
        if let Some(p) = prev {
            if r <= p {
                return Err(Error::InvalidIndex(format!(
                    "row indices must be strictly increasing (saw {p} then {r})"
                )));
            }
        }
        prev = Some(r);
    }
    Ok(())
}

/// Build a view over the given strictly increasing 0-based row indices.
pub fn make_view(m: &FileMatrix, rows: &[usize]) -> Result<MatrixView> {
    validate_rows(rows, m.n_rows())?;
    Ok(MatrixView {
        mat: m.clone(),
        rows: Some(Arc::new(rows.to_vec())),
    })
}

/// Attach the matrix described by `desc_path` without reading its contents.
pub fn attach_matrix(desc_path: impl AsRef<Path>) -> Result<FileMatrix> {
    let desc_path = desc_path.as_ref();
    let text = fs::read_to_string(desc_path).map_err(|e| Error::io(desc_path, e))?;
    let desc = Descriptor::decode(&text, desc_path)?;

    let dir = desc_path.parent().unwrap_or_else(|| Path::new("."));
    let data_path = dir.join(&desc.data_file);
    let file = File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let meta = file.metadata().map_err(|e| Error::io(&data_path, e))?;
    let expected = desc.byte_offset + 8 * desc.n_rows * desc.n_cols;
    if meta.len() < expected {
        return Err(Error::SizeMismatch {
            path: data_path,
            expected,
            actual: meta.len(),
        });
    }

    let mmap = unsafe { Mmap::map(&file) }.map_err(|e| Error::io(&data_path, e))?;
    Ok(FileMatrix {
        n_rows: desc.n_rows as usize,
        n_cols: desc.n_cols as usize,
        byte_offset: desc.byte_offset as usize,
        col_names: desc.col_names.map(Arc::new),
        storage: Storage::Mapped(Arc::new(mmap)),
    })
}

/// Options for [`setup_matrix`].
pub struct SetupOptions {
    pub delimiter: u8,
    /// Buffer budget for the blockwise transpose, in bytes.
    pub buffer_bytes: usize,
}

impl Default for SetupOptions {
    fn default() -> Self {
        SetupOptions {
            delimiter: b',',
            buffer_bytes: DEFAULT_TRANSPOSE_BUFFER,
        }
    }
}

/// Convert a numeric delimited-text file into `<prefix>.bin` (column-major
/// f64 LE) plus `<prefix>.desc`, using bounded working memory.
///
/// The text is row-ordered, so a direct write would need the whole matrix in
/// memory. Instead the parse pass streams rows into a row-major staging file,
/// and a second pass transposes it block-of-columns at a time within
/// `buffer_bytes`.
pub fn setup_matrix(
    source: impl AsRef<Path>,
    out_prefix: impl AsRef<Path>,
    opts: &SetupOptions,
) -> Result<Descriptor> {
    let source = source.as_ref();
    let prefix = out_prefix.as_ref();
    let bin_path = prefix.with_extension("bin");
    let desc_path = prefix.with_extension("desc");
    let stage_path = prefix.with_extension("stage");

    let result = setup_matrix_inner(source, &bin_path, &desc_path, &stage_path, opts);
    let _ = fs::remove_file(&stage_path);
    if result.is_err() {
        // do not leave partial outputs behind
        let _ = fs::remove_file(&bin_path);
        let _ = fs::remove_file(&desc_path);
    }
    result
}

fn setup_matrix_inner(
    source: &Path,
    bin_path: &Path,
    desc_path: &Path,
    stage_path: &Path,
    opts: &SetupOptions,
) -> Result<Descriptor> {
    let file = File::open(source).map_err(|e| Error::io(source, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let stage = File::create(stage_path).map_err(|e| Error::io(stage_path, e))?;
    let mut stage_w = BufWriter::new(stage);

    let mut n_cols = 0usize;
    let mut n_rows = 0usize;
    let mut col_names: Option<Vec<String>> = None;
    let mut first = true;
    let mut record = csv::StringRecord::new();
    let mut rownum = 0usize; // 1-based source line for error reporting
    loop {
        let got = reader
            .read_record(&mut record)
            .map_err(|e| Error::Format(format!("{source:?}: {e}")))?;
        if !got {
            break;
        }
        rownum += 1;
        if record.len() == 1 && record.get(0) == Some("") {
            continue; // blank line
        }
        if first {
            first = false;
            n_cols = record.len();
            // A first row with any non-numeric field is a header.
            if record.iter().any(|f| f.parse::<f64>().is_err()) {
                col_names = Some(record.iter().map(|s| s.to_string()).collect());
                continue;
            }
        }
        if record.len() != n_cols {
            return Err(Error::Format(format!(
                "ragged input: row {rownum} has {} fields, expected {n_cols}",
                record.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: rownum,
                col: c + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: rownum,
                    col: c + 1,
                    msg: format!("non-finite value {field:?} (missing values are not supported)"),
                });
            }
            stage_w
                .write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(stage_path, e))?;
        }
        n_rows += 1;
    }
    stage_w.flush().map_err(|e| Error::io(stage_path, e))?;
    drop(stage_w);

    if n_rows == 0 || n_cols == 0 {
        return Err(Error::Format(format!("{source:?}: no data rows")));
    }

    transpose_stage(stage_path, bin_path, n_rows, n_cols, opts.buffer_bytes)?;

    let data_file = bin_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Format("output prefix has no file name".into()))?;
    let mut desc = Descriptor::new(n_rows, n_cols, data_file);
    desc.col_names = col_names;
    desc.write_to(desc_path)?;
    Ok(desc)
}

/// Blockwise row-major -> column-major transpose through a bounded buffer.
fn transpose_stage(
    stage_path: &Path,
    bin_path: &Path,
    n_rows: usize,
    n_cols: usize,
    buffer_bytes: usize,
) -> Result<()> {
    use std::os::unix::fs::FileExt;

    let stage = File::open(stage_path).map_err(|e| Error::io(stage_path, e))?;
    let out = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(bin_path)
        .map_err(|e| Error::io(bin_path, e))?;
    let mut out_w = BufWriter::new(out);

    let block_cols = (buffer_bytes / (8 * n_rows)).clamp(1, n_cols);
    let mut block = vec![0f64; block_cols * n_rows];
    let mut row_buf = vec![0u8; 8 * block_cols];

    let mut j0 = 0usize;
    while j0 < n_cols {
        let w = block_cols.min(n_cols - j0);
        for i in 0..n_rows {
            let off = (i as u64 * n_cols as u64 + j0 as u64) * 8;
            stage
                .read_exact_at(&mut row_buf[..8 * w], off)
                .map_err(|e| Error::io(stage_path, e))?;
            for jj in 0..w {
                let bytes: [u8; 8] = row_buf[8 * jj..8 * jj + 8].try_into().unwrap();
                block[jj * n_rows + i] = f64::from_le_bytes(bytes);
            }
        }
        for v in &block[..w * n_rows] {
            out_w
                .write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(bin_path, e))?;
        }
        j0 += w;
    }
    out_w.flush().map_err(|e| Error::io(bin_path, e))?;
    Ok(())
}

/// Write an in-memory column-major buffer as a `.bin` + `.desc` pair.
/// Used by the synthetic data generator.
pub fn write_matrix_files(
    prefix: impl AsRef<Path>,
    n_rows: usize,
    n_cols: usize,
    col_major: &[f64],
    col_names: Option<Vec<String>>,
) -> Result<(Descriptor, PathBuf)> {
    let prefix = prefix.as_ref();
    let bin_path = prefix.with_extension("bin");
    let desc_path = prefix.with_extension("desc");
    assert_eq!(col_major.len(), n_rows * n_cols);

    let out = File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut w = BufWriter::new(out);
    for v in col_major {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(&bin_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&bin_path, e))?;

    let data_file = bin_path.file_name().unwrap().to_string_lossy().into_owned();
    let mut desc = Descriptor::new(n_rows, n_cols, data_file);
    desc.col_names = col_names;
    desc.write_to(&desc_path)?;
    Ok((desc, desc_path))
}

/// Read a one-value-per-line response vector.
pub fn read_response(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let mut y = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            row: i + 1,
            col: 1,
            msg: format!("not a number: {t:?}"),
        })?;
        y.push(v);
    }
    if y.is_empty() {
        return Err(Error::Format(format!("{path:?}: empty response file")));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_csv(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn setup_writes_column_major() {
        let dir = tempdir().unwrap();
        let csv = write_csv(dir.path(), "m.csv", "1,2\n3,4\n");
        let desc = setup_matrix(&csv, dir.path().join("m"), &SetupOptions::default()).unwrap();
        assert_eq!(desc.n_rows, 2);
        assert_eq!(desc.n_cols, 2);
        let bytes = fs::read(dir.path().join("m.bin")).unwrap();
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn setup_rejects_empty_file() {
        let dir = tempdir().unwrap();
        let csv = write_csv(dir.path(), "e.csv", "");
        let err = setup_matrix(&csv, dir.path().join("e"), &SetupOptions::default());
        assert!(matches!(err, Err(Error::Format(_))));
        assert!(!dir.path().join("e.bin").exists());
    }

    #[test]
    fn setup_reads_header_row() {
        let dir = tempdir().unwrap();
        let csv = write_csv(dir.path(), "h.csv", "a,b\n1,2\n3,4\n5,6\n");
        let desc = setup_matrix(&csv, dir.path().join("h"), &SetupOptions::default()).unwrap();
        assert_eq!(desc.col_names, Some(vec!["a".into(), "b".into()]));
        assert_eq!(desc.n_rows, 3);
    }

    #[test]
    fn setup_rejects_ragged_and_non_numeric() {
        let dir = tempdir().unwrap();
        let ragged = write_csv(dir.path(), "r.csv", "1,2\n3\n");
        assert!(matches!(
            setup_matrix(&ragged, dir.path().join("r"), &SetupOptions::default()),
            Err(Error::Format(_))
        ));
        let bad = write_csv(dir.path(), "b.csv", "1,2\n3,x\n");
        match setup_matrix(&bad, dir.path().join("b"), &SetupOptions::default()) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn attach_round_trips_and_shares() {
        let dir = tempdir().unwrap();
        let csv = write_csv(dir.path(), "m.csv", "1.5,2\n3,4\n");
        setup_matrix(&csv, dir.path().join("m"), &SetupOptions::default()).unwrap();
        let m1 = attach_matrix(dir.path().join("m.desc")).unwrap();
        let m2 = attach_matrix(dir.path().join("m.desc")).unwrap();
        assert_eq!(m1.get(0, 0), 1.5);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m1.get(i, j).to_bits(), m2.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn attach_detects_size_mismatch() {
        let dir = tempdir().unwrap();
        let csv = write_csv(dir.path(), "m.csv", "1,2\n3,4\n");
        setup_matrix(&csv, dir.path().join("m"), &SetupOptions::default()).unwrap();
        // claim more rows than the data file holds
        let text = fs::read_to_string(dir.path().join("m.desc")).unwrap();
        let patched = text.replace("\"n_rows\": 2", "\"n_rows\": 20");
        fs::write(dir.path().join("m.desc"), patched).unwrap();
        assert!(matches!(
            attach_matrix(dir.path().join("m.desc")),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn descriptor_round_trip() {
        let mut d = Descriptor::new(7, 3, "x.bin".into());
        d.col_names = Some(vec!["a".into(), "b".into(), "c".into()]);
        let d2 = Descriptor::decode(&d.encode(), Path::new("x.desc")).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn views_select_rows() {
        let m = FileMatrix::from_dense(2, 2, vec![1.0, 3.0, 2.0, 4.0], None).unwrap();
        let v = make_view(&m, &[0]).unwrap();
        assert_eq!(v.n(), 1);
        assert_eq!((v.get(0, 0), v.get(0, 1)), (1.0, 2.0));

        let full = make_view(&m, &[0, 1]).unwrap();
        for j in 0..2 {
            let (s_full, _) = full.col_sums(j);
            let (s_raw, _) = m.view().col_sums(j);
            assert_eq!(s_full, s_raw);
        }

        assert!(make_view(&m, &[5]).is_err());
        assert!(make_view(&m, &[1, 0]).is_err());
        assert!(make_view(&m, &[0, 0]).is_err());
    }

    #[test]
    fn subview_composes() {
        let m = FileMatrix::from_dense(5, 2, (0..10).map(|v| v as f64).collect(), None).unwrap();
        let a = make_view(&m, &[0, 2, 3, 4]).unwrap();
        let b = a.subview(&[1, 3]).unwrap(); // rows 2 and 4 of m
        let direct = make_view(&m, &[2, 4]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b.get(i, j), direct.get(i, j));
            }
        }
    }

    #[test]
    fn concurrent_reads_match_serial() {
        let dir = tempdir().unwrap();
        let n = 64;
        let p = 16;
        let data: Vec<f64> = (0..n * p).map(|v| (v as f64).sin()).collect();
        write_matrix_files(dir.path().join("c"), n, p, &data, None).unwrap();
        let m = attach_matrix(dir.path().join("c.desc")).unwrap();
        let serial: Vec<f64> = (0..p).map(|j| m.view().col_sums(j).0).collect();
        let par: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..p)
                .map(|j| {
                    let m = m.clone();
                    s.spawn(move || m.view().col_sums(j).0)
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(serial, par);
    }
}
