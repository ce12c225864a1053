use super::{AudioClip, AudioError};

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, AudioError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| AudioError::Truncated(format!("u32 at offset {at}")))
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16, AudioError> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| AudioError::Truncated(format!("u16 at offset {at}")))
}

fn tag(bytes: &[u8], at: usize) -> Result<&[u8], AudioError> {
    bytes
        .get(at..at + 4)
        .ok_or_else(|| AudioError::Truncated(format!("chunk tag at offset {at}")))
}

/// Parse a RIFF/WAVE container holding 16-bit PCM. Stereo is averaged to
/// mono; samples are scaled by 1/32768.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let magic = tag(bytes, 0)?;
    if magic != b"RIFF" {
        return Err(AudioError::BadMagic {
            expected: "RIFF".into(),
            got: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let wave = tag(bytes, 8)?;
    if wave != b"WAVE" {
        return Err(AudioError::BadMagic {
            expected: "WAVE".into(),
            got: String::from_utf8_lossy(wave).into_owned(),
        });
    }

    let mut channels = 0u16;
    let mut sample_rate = 0u32;
    let mut bits = 0u16;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = tag(bytes, at)?;
        let size = read_u32(bytes, at + 4)? as usize;
        let body = bytes
            .get(at + 8..at + 8 + size)
            .ok_or_else(|| AudioError::Truncated(format!("chunk {:?} claims {size} bytes", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => {
                let codec = read_u16(body, 0)?;
                if codec != 1 {
                    return Err(AudioError::UnsupportedCodec(format!("format tag {codec}, only PCM (1) supported")));
                }
                channels = read_u16(body, 2)?;
                sample_rate = read_u32(body, 4)?;
                bits = read_u16(body, 14)?;
            }
            b"data" => data = Some(body),
            _ => {} // skip unknown chunks
        }
        at += 8 + size + (size & 1); // chunks are word-aligned
    }

    let data = data.ok_or_else(|| AudioError::Truncated("missing data chunk".into()))?;
    if channels == 0 || sample_rate == 0 {
        return Err(AudioError::Truncated("missing fmt chunk".into()));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedCodec(format!("{bits}-bit samples, only 16-bit supported")));
    }
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedCodec(format!("{channels} channels, only mono/stereo supported")));
    }

    let frame_bytes = 2 * channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(AudioError::Truncated("data chunk is not a whole number of frames".into()));
    }
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0;
        for c in 0..channels as usize {
            let at = f * frame_bytes + 2 * c;
            let v = i16::from_le_bytes([data[at], data[at + 1]]);
            acc += v as f64 / 32768.0;
        }
        samples.push(acc / channels as f64);
    }
    AudioClip::new(samples, sample_rate)
}

/// Serialize mono samples as a 16-bit PCM RIFF/WAVE file. Samples are
/// clamped to `[-1, 1]` and scaled by 32767.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples.len();
    let data_size = 2 * n as u32;
    let mut out = Vec::with_capacity(44 + 2 * n);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
