use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextRun {
    pub addr: u32,
    pub words: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataRun {
    pub addr: u32,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProgramImage {
    pub text: Vec<TextRun>,
    pub data: Vec<DataRun>,
    pub entry: u32,
    pub symbols: BTreeMap<String, u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("text run at {0:#010x} is not word aligned")]
    Unaligned(u32),
    #[error("runs at {0:#010x} and {1:#010x} overlap")]
    Overlap(u32, u32),
    #[error("run at {0:#010x} wraps past the end of the address space")]
    Wraps(u32),
}

impl ProgramImage {
    /// Every run as (address, byte length), text first.
    pub fn extents(&self) -> Vec<(u32, u64)> {
        self.text
            .iter()
            .map(|r| (r.addr, 4 * r.words.len() as u64))
            .chain(self.data.iter().map(|r| (r.addr, r.bytes.len() as u64)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ImageError> {
        if let Some(r) = self.text.iter().find(|r| r.addr % 4 != 0) {
            return Err(ImageError::Unaligned(r.addr));
        }
        let mut ext = self.extents();
        if let Some(&(a, _)) = ext.iter().find(|(a, l)| *a as u64 + l > 1 << 32) {
            return Err(ImageError::Wraps(a));
        }
        ext.retain(|&(_, l)| l > 0);
        ext.sort_unstable();
        for w in ext.windows(2) {
            if w[0].0 as u64 + w[0].1 > w[1].0 as u64 {
                return Err(ImageError::Overlap(w[0].0, w[1].0));
            }
        }
        Ok(())
    }

    /// The word at `addr` if it lies in a text run.
    pub fn text_word(&self, addr: u32) -> Option<u32> {
        self.text.iter().find_map(|r| {
            let off = addr.checked_sub(r.addr)?;
            if off % 4 != 0 {
                return None;
            }
            r.words.get((off / 4) as usize).copied()
        })
    }
}
