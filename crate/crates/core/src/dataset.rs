//! Flattened sample matrices with their tuple layout and train/test split.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic "RTQD", version u32 = 1
//! case name (str), mu f64, seed u64, n u64
//! scalars: count u32, names (str)
//! tensors: count u32, then (name str, order u32)
//! anchor (str), label order u32
//! n_train u64, train indices u64 × n_train, test indices u64 × (n − n_train)
//! features f64 × n·d_in, labels f64 × n·d_out
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::cases::{Case, CaseKind};
use crate::error::{invalid, Error, Result};
use crate::predictors::TrainingData;
use crate::tensor::{tensor_column_names, ShapeMeta};
use crate::{Tensor, Tuple};

pub const MAGIC: &[u8; 4] = b"RTQD";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    case: Case,
    seed: u64,
    meta: ShapeMeta,
    features: Vec<f64>,
    labels: Vec<f64>,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Dataset {
    pub fn new(
        case: Case,
        seed: u64,
        features: Vec<f64>,
        labels: Vec<f64>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let meta = case.input_meta();
        let (d_in, d_out) = (meta.flat_len(), case.output_dim());
        if features.len() % d_in != 0 || labels.len() % d_out != 0 {
            return Err(invalid!("matrix sizes do not fit the case dims"));
        }
        let n = features.len() / d_in;
        if labels.len() / d_out != n || n == 0 {
            return Err(invalid!("feature and label row counts differ or are zero"));
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(invalid!("split indices must partition 0..{n}"));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid!("split indices must partition 0..{n}"));
        }
        Ok(Self {
            case,
            seed,
            meta,
            features,
            labels,
            train,
            test,
        })
    }

    pub fn case(&self) -> &Case {
        &self.case
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn meta(&self) -> &ShapeMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.input_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.meta.flat_len()
    }

    pub fn output_dim(&self) -> usize {
        self.case.output_dim()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn label_row(&self, i: usize) -> &[f64] {
        let d = self.output_dim();
        &self.labels[i * d..(i + 1) * d]
    }

    pub fn input(&self, i: usize) -> Result<Tuple> {
        Tuple::unflatten(self.feature_row(i), &self.meta)
    }

    pub fn label(&self, i: usize) -> Result<Tensor> {
        Tensor::new(self.case.label_order(), 3, self.label_row(i).to_vec())
    }

    /// Rows `idx` gathered into contiguous feature and label matrices.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_dim());
        let mut y = Vec::with_capacity(idx.len() * self.output_dim());
        for &i in idx {
            x.extend_from_slice(self.feature_row(i));
            y.extend_from_slice(self.label_row(i));
        }
        (x, y)
    }

    /// Borrowed view of the whole matrix for training.
    pub fn as_training_data(&self) -> Result<TrainingData<'_>> {
        TrainingData::new(&self.features, &self.labels, self.input_dim(), self.output_dim())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
            w.write_u32::<LE>(s.len() as u32)?;
            w.write_all(s.as_bytes())
        }
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        put_str(w, self.case.kind.name())?;
        w.write_f64::<LE>(self.case.mu)?;
        w.write_u64::<LE>(self.seed)?;
        w.write_u64::<LE>(self.len() as u64)?;
        w.write_u32::<LE>(self.meta.scalars.len() as u32)?;
        for s in &self.meta.scalars {
            put_str(w, s)?;
        }
        w.write_u32::<LE>(self.meta.tensors.len() as u32)?;
        for (name, order) in &self.meta.tensors {
            put_str(w, name)?;
            w.write_u32::<LE>(*order as u32)?;
        }
        put_str(w, &self.meta.anchor)?;
        w.write_u32::<LE>(self.case.label_order() as u32)?;
        w.write_u64::<LE>(self.train.len() as u64)?;
        for &i in self.train.iter().chain(&self.test) {
            w.write_u64::<LE>(i as u64)?;
        }
        for &v in self.features.iter().chain(&self.labels) {
            w.write_f64::<LE>(v)?;
        }
        Ok(())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let fe = |_| Error::Format("dataset file is truncated".into());
        let mut r = Cursor::new(bytes);
        let remaining = |r: &Cursor<&[u8]>| bytes.len() - r.position() as usize;
        let get_str = |r: &mut Cursor<&[u8]>| -> Result<String> {
            let len = r.read_u32::<LE>().map_err(fe)? as usize;
            if len > bytes.len() - r.position() as usize {
                return Err(Error::Format("dataset file is truncated".into()));
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(fe)?;
            String::from_utf8(buf).map_err(|_| Error::Format("invalid UTF-8 in header".into()))
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fe)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let version = r.read_u32::<LE>().map_err(fe)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let kind: CaseKind = get_str(&mut r)?
            .parse()
            .map_err(|e: Error| Error::Format(e.to_string()))?;
        let mu = r.read_f64::<LE>().map_err(fe)?;
        let case = Case::with_mu(kind, mu).map_err(|e| Error::Format(e.to_string()))?;
        let seed = r.read_u64::<LE>().map_err(fe)?;
        let n = r.read_u64::<LE>().map_err(fe)? as usize;
        let ns = r.read_u32::<LE>().map_err(fe)? as usize;
        if ns > remaining(&r) {
            return Err(Error::Format("dataset file is truncated".into()));
        }
        let scalars = (0..ns).map(|_| get_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let nt = r.read_u32::<LE>().map_err(fe)? as usize;
        if nt > remaining(&r) {
            return Err(Error::Format("dataset file is truncated".into()));
        }
        let mut tensors = Vec::with_capacity(nt);
        for _ in 0..nt {
            let name = get_str(&mut r)?;
            tensors.push((name, r.read_u32::<LE>().map_err(fe)? as usize));
        }
        let anchor = get_str(&mut r)?;
        let label_order = r.read_u32::<LE>().map_err(fe)? as usize;
        let meta = ShapeMeta {
            scalars,
            tensors,
            anchor,
        };
        if meta != case.input_meta() || label_order != case.label_order() {
            return Err(Error::Format(format!("layout does not match case {kind}")));
        }
        let n_train = r.read_u64::<LE>().map_err(fe)? as usize;
        let (d_in, d_out) = (meta.flat_len(), case.output_dim());
        let need = n
            .checked_mul(8 + 8 * (d_in + d_out))
            .ok_or_else(|| Error::Format("sample count overflows".into()))?;
        if need != remaining(&r) || n_train > n {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {need}",
                remaining(&r)
            )));
        }
        let mut idx = vec![0u64; n];
        r.read_u64_into::<LE>(&mut idx).map_err(fe)?;
        let idx: Vec<usize> = idx.into_iter().map(|i| i as usize).collect();
        let mut features = vec![0.0; n * d_in];
        r.read_f64_into::<LE>(&mut features).map_err(fe)?;
        let mut labels = vec![0.0; n * d_out];
        r.read_f64_into::<LE>(&mut labels).map_err(fe)?;
        Self::new(
            case,
            seed,
            features,
            labels,
            idx[..n_train].to_vec(),
            idx[n_train..].to_vec(),
        )
        .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    /// Header: `index`, `split`, feature names, then label names.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["index".to_string(), "split".to_string()];
        h.extend(self.meta.column_names());
        h.extend(tensor_column_names(self.case.label_name(), self.case.label_order()));
        h
    }

    /// One row per sample in index order. Reals use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut split = vec!["train"; self.len()];
        for &i in &self.test {
            split[i] = "test";
        }
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        out.write_record(self.csv_header()).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string(), split[i].to_string()];
            row.extend(self.feature_row(i).iter().map(|v| v.to_string()));
            row.extend(self.label_row(i).iter().map(|v| v.to_string()));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}
