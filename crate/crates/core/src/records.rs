//! Little-endian binary container for named tensor records, shared by model
//! checkpoints and persisted quality models.
//!
//! Layout: an 8-byte magic, a `u32` format version, a fixed run of `u32`
//! header fields, then repeated records
//! `{u32 name length, UTF-8 name, u32 rank, u32 dims..., f32 data...}`.
//! Record order is fixed by the writer, so save -> load -> save round trips
//! are byte-identical.

use crate::numcore::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: [u8; 8] },
    #[error("unsupported format version {got} (expected {expected})")]
    BadVersion { expected: u32, got: u32 },
    #[error("truncated record stream while reading {context}")]
    Truncated { context: &'static str },
    #[error("malformed record: {reason}")]
    Malformed { reason: String },
}

pub type Result<T> = std::result::Result<T, RecordError>;

pub struct RecordWriter {
    buf: Vec<u8>,
}

impl RecordWriter {
    pub fn new(magic: [u8; 8], version: u32, header: &[u32]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(&magic);
        buf.extend_from_slice(&version.to_le_bytes());
        for h in header {
            buf.extend_from_slice(&h.to_le_bytes());
        }
        Self { buf }
    }

    /// Append a named tensor, storing values as `f32`.
    pub fn put(&mut self, name: &str, tensor: &Tensor) {
        self.buf
            .extend_from_slice(&(name.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(name.as_bytes());
        self.buf
            .extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            self.buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct RecordReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> RecordReader<'a> {
    /// Validate magic and version, read `header_len` u32 header fields and
    /// position the cursor at the first record.
    pub fn open(
        bytes: &'a [u8],
        magic: [u8; 8],
        version: u32,
        header_len: usize,
    ) -> Result<(Vec<u32>, Self)> {
        if bytes.len() < 8 || bytes[..8] != magic {
            return Err(RecordError::BadMagic { expected: magic });
        }
        let mut r = Self { bytes, pos: 8 };
        let got = r.u32("version")?;
        if got != version {
            return Err(RecordError::BadVersion {
                expected: version,
                got,
            });
        }
        let mut header = Vec::with_capacity(header_len);
        for _ in 0..header_len {
            header.push(r.u32("header")?);
        }
        Ok((header, r))
    }

    fn u32(&mut self, context: &'static str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(RecordError::Truncated { context });
        }
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    /// Read the next `(name, tensor)` record, or `None` at end of stream.
    pub fn next_record(&mut self) -> Result<Option<(String, Tensor)>> {
        if self.is_exhausted() {
            return Ok(None);
        }
        let name_len = self.u32("record name length")? as usize;
        if self.pos + name_len > self.bytes.len() {
            return Err(RecordError::Truncated {
                context: "record name",
            });
        }
        let name = std::str::from_utf8(&self.bytes[self.pos..self.pos + name_len])
            .map_err(|_| RecordError::Malformed {
                reason: "record name is not UTF-8".into(),
            })?
            .to_string();
        self.pos += name_len;
        let rank = self.u32("record rank")? as usize;
        if rank > 8 {
            return Err(RecordError::Malformed {
                reason: format!("implausible rank {rank}"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32("record dims")? as usize);
        }
        let numel: usize = shape.iter().product();
        if self.pos + 4 * numel > self.bytes.len() {
            return Err(RecordError::Truncated {
                context: "record data",
            });
        }
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            let off = self.pos + 4 * i;
            data.push(f32::from_le_bytes(self.bytes[off..off + 4].try_into().unwrap()) as f64);
        }
        self.pos += 4 * numel;
        let tensor = Tensor::new(shape, data).map_err(|e| RecordError::Malformed {
            reason: e.to_string(),
        })?;
        Ok(Some((name, tensor)))
    }

    /// Read all remaining records in stream order.
    pub fn read_all(&mut self) -> Result<Vec<(String, Tensor)>> {
        let mut out = Vec::new();
        while let Some(rec) = self.next_record()? {
            out.push(rec);
        }
        Ok(out)
    }
}
