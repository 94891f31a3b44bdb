//! Versioned binary checkpoints.
//!
//! Layout: an 8-byte magic+version tag, a fixed header (dims, vocabulary
//! sizes, seed, step count), then the f64 tables for parameters and
//! optimizer accumulators, the similarity-index buffers, and the frequency
//! tracker, all little-endian. f64 values are stored as raw bits, so a
//! round trip is bit-exact.

use std::collections::VecDeque;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::data::FrequencyTracker;
use crate::enhance::SimilarityIndex;
use crate::error::{Error, Result};
use crate::model::{Embedding, ModelParams, OptimizerState};

const MAGIC: &[u8; 8] = b"TKGICKP1";

/// Everything needed to resume or evaluate a run at a task boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub index: SimilarityIndex,
    pub tracker: FrequencyTracker,
    pub seed: u64,
    /// Optimizer steps taken so far.
    pub step: u64,
}

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }
    fn i64(&mut self, v: i64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.out.write_all(&v.to_bits().to_le_bytes())
    }
    fn table(&mut self, e: &Embedding) -> io::Result<()> {
        self.u64(e.rows() as u64)?;
        self.u64(e.dim() as u64)?;
        for &v in e.data() {
            self.f64(v)?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    input: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn i64(&mut self) -> io::Result<i64> {
        Ok(i64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.bytes()?)))
    }
    fn table(&mut self) -> Result<Embedding> {
        let rows = self.u64().map_err(io_err)? as usize;
        let dim = self.u64().map_err(io_err)? as usize;
        let mut data = vec![0.0; rows * dim];
        for v in &mut data {
            *v = self.f64().map_err(io_err)?;
        }
        Embedding::from_data(rows, dim, data)
    }
}

fn io_err(e: io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = Writer {
        out: io::BufWriter::new(file),
    };
    let res = (|| -> io::Result<()> {
        w.out.write_all(MAGIC)?;
        w.u64(ckpt.params.dim() as u64)?;
        w.u64(ckpt.seed)?;
        w.u64(ckpt.step)?;
        w.i64(ckpt.params.bucket_width)?;
        w.table(&ckpt.params.entities)?;
        w.table(&ckpt.params.relations)?;
        w.table(&ckpt.params.buckets)?;
        w.f64(ckpt.optimizer.learning_rate)?;
        w.f64(ckpt.optimizer.weight_decay)?;
        w.table(&ckpt.optimizer.entity_acc)?;
        w.table(&ckpt.optimizer.relation_acc)?;
        w.table(&ckpt.optimizer.bucket_acc)?;

        w.u64(ckpt.index.capacity() as u64)?;
        match ckpt.index.last_time() {
            Some(t) => {
                w.u64(1)?;
                w.i64(t)?;
            }
            None => w.u64(0)?,
        }
        w.u64(ckpt.index.buffers().len() as u64)?;
        for buf in ckpt.index.buffers() {
            w.u64(buf.len() as u64)?;
            for &(entity, time) in buf {
                w.u64(entity as u64)?;
                w.i64(time)?;
            }
        }

        let freq = ckpt.tracker.freq_table();
        w.u64(freq.len() as u64)?;
        for e in 0..freq.len() {
            w.u64(ckpt.tracker.freq(e))?;
            w.u64(ckpt.tracker.degree(e))?;
        }
        w.out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        input: io::BufReader::new(file),
    };
    let magic: [u8; 8] = r.bytes().map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let dim = r.u64().map_err(io_err)? as usize;
    let seed = r.u64().map_err(io_err)?;
    let step = r.u64().map_err(io_err)?;
    let bucket_width = r.i64().map_err(io_err)?;
    let entities = r.table()?;
    let relations = r.table()?;
    let buckets = r.table()?;
    if entities.dim() != dim || relations.dim() != dim || buckets.dim() != dim {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "table dims disagree with header".into(),
        });
    }
    let params = ModelParams {
        entities,
        relations,
        buckets,
        bucket_width,
    };
    let learning_rate = r.f64().map_err(io_err)?;
    let weight_decay = r.f64().map_err(io_err)?;
    let optimizer = OptimizerState {
        learning_rate,
        weight_decay,
        entity_acc: r.table()?,
        relation_acc: r.table()?,
        bucket_acc: r.table()?,
    };

    let capacity = r.u64().map_err(io_err)? as usize;
    let last_time = if r.u64().map_err(io_err)? == 1 {
        Some(r.i64().map_err(io_err)?)
    } else {
        None
    };
    let num_buffers = r.u64().map_err(io_err)? as usize;
    let mut buffers = Vec::with_capacity(num_buffers);
    for _ in 0..num_buffers {
        let len = r.u64().map_err(io_err)? as usize;
        let mut buf = VecDeque::with_capacity(len);
        for _ in 0..len {
            let entity = r.u64().map_err(io_err)? as usize;
            let time = r.i64().map_err(io_err)?;
            buf.push_back((entity, time));
        }
        buffers.push(buf);
    }
    let index = SimilarityIndex::from_parts(capacity, buffers, last_time);

    let n = r.u64().map_err(io_err)? as usize;
    let mut freq = vec![0u64; n];
    let mut degree = vec![0u64; n];
    for e in 0..n {
        freq[e] = r.u64().map_err(io_err)?;
        degree[e] = r.u64().map_err(io_err)?;
    }
    let tracker = FrequencyTracker::from_tables(freq, degree);

    Ok(Checkpoint {
        params,
        optimizer,
        index,
        tracker,
        seed,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quadruple;
    use crate::model::ModelConfig;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let cfg = ModelConfig {
            dim: 5,
            ..Default::default()
        };
        let mut rng = stream_rng(13, Stream::Init);
        let mut params = ModelParams::init(3, 4, 7, &cfg, &mut rng).unwrap();
        params.grow_entities(9, cfg.init_scale(), &mut rng);
        // Oddball values must survive exactly.
        params.entities.row_mut(0)[0] = f64::MIN_POSITIVE;
        params.entities.row_mut(0)[1] = -0.0;
        params.entities.row_mut(0)[2] = 1.0 + f64::EPSILON;
        let mut optimizer = OptimizerState::new(&params, 0.05, 0.001);
        optimizer.entity_acc.row_mut(2)[3] = 0.123456789123456789;
        let mut index = SimilarityIndex::new(3);
        for t in 0..10 {
            index
                .record(&Quadruple::new((t % 9) as usize, (t % 6) as usize, 0, t))
                .unwrap();
        }
        let mut tracker = FrequencyTracker::new();
        tracker.observe(&[Quadruple::new(1, 0, 2, 0), Quadruple::new(2, 1, 2, 1)]);

        let ckpt = Checkpoint {
            params,
            optimizer,
            index,
            tracker,
            seed: 404,
            step: 12345,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.eval");
        save_checkpoint(&path, &ckpt).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, ckpt);
        // Bit-exactness beyond PartialEq: compare raw bit patterns.
        for (a, b) in ckpt
            .params
            .entities
            .data()
            .iter()
            .zip(loaded.params.entities.data())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Saving the loaded checkpoint reproduces the same bytes.
        let path2 = dir.path().join("checkpoint.carry");
        save_checkpoint(&path2, &loaded).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        fs::write(&path, b"NOTACKPTxxxxxxxxxxx").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Format { .. })
        ));
    }
}
