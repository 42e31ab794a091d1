//! Binary ensemble checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "TPMSENS\0"
//! version      u32
//! scalar       u8       bytes per stored value (4 or 8)
//! spec         u32 count + u32 widths, for the parameter head, strain head, trunk
//!              f64 dropout, u8 batch-norm flag, u8 activation (0 relu, 1 tanh, 2 identity)
//! stress_mean  f64
//! stress_std   f64
//! strain_max   f64
//! members      u32 count, then per member:
//!                u64 seed, u32 epochs run, u32 best epoch,
//!                u64 value count, values (parameters then batch-norm running stats)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ensemble::{EnsembleModel, MemberMeta, Normalization};
use super::network::{Activation, DualHeadMlp};
use super::MlpSpec;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TPMSENS\0";

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_value<T: Scalar>(buf: &mut Vec<u8>, v: T) {
    if std::mem::size_of::<T>() == 4 {
        buf.extend_from_slice(&v.to_f32().expect("f32 value").to_le_bytes());
    } else {
        put_f64(buf, v.to_f64_lossy());
    }
}

pub fn write_checkpoint<T: Scalar>(model: &EnsembleModel<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    buf.push(std::mem::size_of::<T>() as u8);
    let spec = model.spec();
    for widths in [&spec.param_widths, &spec.strain_widths, &spec.trunk_widths] {
        put_u32(&mut buf, widths.len() as u32);
        for &w in widths.iter() {
            put_u32(&mut buf, w as u32);
        }
    }
    put_f64(&mut buf, spec.dropout);
    buf.push(spec.batch_norm as u8);
    buf.push(spec.activation.code());
    let norm = model.normalization();
    put_f64(&mut buf, norm.stress_mean.to_f64_lossy());
    put_f64(&mut buf, norm.stress_std.to_f64_lossy());
    put_f64(&mut buf, model.strain_max().to_f64_lossy());
    put_u32(&mut buf, model.len() as u32);
    for (member, meta) in model.members().iter().zip(model.meta()) {
        put_u64(&mut buf, meta.seed);
        put_u32(&mut buf, meta.epochs_run as u32);
        put_u32(&mut buf, meta.best_epoch as u32);
        let state = member.state_slices();
        put_u64(&mut buf, state.iter().map(|s| s.len() as u64).sum());
        for v in state.iter().flat_map(|s| s.iter()) {
            put_value(&mut buf, *v);
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::malformed(
                self.path,
                format!("truncated checkpoint at byte {}", self.pos),
            )),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn value<T: Scalar>(&mut self, width: u8) -> Result<T> {
        let v = if width == 4 {
            f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as f64
        } else {
            self.f64()?
        };
        Ok(T::lit(v))
    }
}

/// Decodes a checkpoint; `path` is only used in error messages.
pub fn read_checkpoint<T: Scalar>(bytes: &[u8], path: &Path) -> Result<EnsembleModel<T>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(Error::malformed(path, "not an ensemble checkpoint"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let width = r.u8()?;
    if width != 4 && width != 8 {
        return Err(Error::malformed(path, format!("unsupported value width {width}")));
    }
    let mut widths = Vec::new();
    for _ in 0..3 {
        let n = r.u32()? as usize;
        let mut ws = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            ws.push(r.u32()? as usize);
        }
        widths.push(ws);
    }
    let dropout = r.f64()?;
    let batch_norm = r.u8()? != 0;
    let activation = Activation::from_code(r.u8()?).ok_or_else(|| Error::malformed(path, "unknown activation code"))?;
    let trunk_widths = widths.pop().expect("three lists");
    let strain_widths = widths.pop().expect("three lists");
    let param_widths = widths.pop().expect("three lists");
    let spec = MlpSpec {
        param_widths,
        strain_widths,
        trunk_widths,
        dropout,
        batch_norm,
        activation,
    };
    spec.validate().map_err(|e| Error::malformed(path, e.to_string()))?;
    let normalization = Normalization {
        stress_mean: T::lit(r.f64()?),
        stress_std: T::lit(r.f64()?),
    };
    let strain_max = T::lit(r.f64()?);
    let count = r.u32()? as usize;
    let mut members = Vec::with_capacity(count.min(1024));
    let mut meta = Vec::with_capacity(count.min(1024));
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for _ in 0..count {
        let seed = r.u64()?;
        let epochs_run = r.u32()? as usize;
        let best_epoch = r.u32()? as usize;
        let mut net = DualHeadMlp::<T>::new(&spec, &mut rng)?;
        let expected: usize = net.state_slices().iter().map(|s| s.len()).sum();
        let stored = r.u64()? as usize;
        if stored != expected {
            return Err(Error::malformed(
                path,
                format!("member holds {stored} values, architecture needs {expected}"),
            ));
        }
        for slice in net.state_slices_mut() {
            for v in slice.iter_mut() {
                *v = r.value(width)?;
            }
        }
        members.push(net);
        meta.push(MemberMeta {
            seed,
            epochs_run,
            best_epoch,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::malformed(path, "trailing bytes after checkpoint"));
    }
    EnsembleModel::new(spec, normalization, strain_max, members, meta)
        .map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn save_checkpoint<T: Scalar>(model: &EnsembleModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<EnsembleModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve_lab::Phase;
    use crate::surrogate::gradcheck::randomize_state;
    use crate::tpms_field::{Primitive, WeightVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model<T: Scalar>() -> EnsembleModel<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = MlpSpec::compact();
        let members = (0..3)
            .map(|_| {
                let mut m = DualHeadMlp::new(&spec, &mut rng).unwrap();
                randomize_state(&mut m, &mut rng);
                m
            })
            .collect();
        let meta = (0..3)
            .map(|i| MemberMeta {
                seed: 100 + i,
                epochs_run: 7,
                best_epoch: 3,
            })
            .collect();
        let norm = Normalization {
            stress_mean: T::lit(12.5),
            stress_std: T::lit(4.0),
        };
        EnsembleModel::new(spec, norm, T::lit(0.57), members, meta).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let m = model::<f64>();
        save_checkpoint(&m, &path).unwrap();
        let back: EnsembleModel<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        let w = WeightVector::unit(Primitive::FischerKochS);
        assert_eq!(
            back.predict_stress(&w, &[0.1, 0.2], Phase::Load),
            m.predict_stress(&w, &[0.1, 0.2], Phase::Load)
        );

        let m32 = model::<f32>();
        let bytes = write_checkpoint(&m32);
        assert_eq!(read_checkpoint::<f32>(&bytes, &path).unwrap(), m32);
    }

    #[test]
    fn header_is_little_endian() {
        let bytes = write_checkpoint(&model::<f64>());
        assert_eq!(&bytes[..8], b"TPMSENS\0");
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(bytes[12], 8);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let path = Path::new("mem.bin");
        let mut bytes = write_checkpoint(&model::<f64>());
        assert!(matches!(
            read_checkpoint::<f64>(&bytes[..bytes.len() - 3], path),
            Err(Error::Malformed { .. })
        ));
        bytes[8] = 9;
        assert!(matches!(
            read_checkpoint::<f64>(&bytes, path),
            Err(Error::SchemaVersion { found: 9, .. })
        ));
        assert!(matches!(
            read_checkpoint::<f64>(b"garbage!", path),
            Err(Error::Malformed { .. })
        ));
    }
}
