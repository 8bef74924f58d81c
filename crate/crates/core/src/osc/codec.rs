//! OSC 1.0 binary encoding.
//!
//! Strings are NUL-terminated and zero-padded to a 4-byte boundary, numbers
//! are big-endian, blobs carry a big-endian `i32` length and are zero-padded.
//! Bundles start with `#bundle\0`, an 8-byte NTP time tag, then size-prefixed
//! elements.

use super::OscError;

const BUNDLE_TAG: &[u8; 8] = b"#bundle\0";
const MAX_BUNDLE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum OscArg {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscArg {
    pub fn type_tag(&self) -> u8 {
        match self {
            OscArg::Int(_) => b'i',
            OscArg::Float(_) => b'f',
            OscArg::Str(_) => b's',
            OscArg::Blob(_) => b'b',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        Self { address: address.into(), args }
    }
}

/// 64-bit NTP time tag: seconds since 1900 in the high word, fraction in the
/// low word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTag(pub u64);

impl TimeTag {
    pub const IMMEDIATE: TimeTag = TimeTag(1);

    pub fn is_immediate(self) -> bool {
        self == Self::IMMEDIATE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscBundle {
    pub timetag: TimeTag,
    pub elements: Vec<OscPacket>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OscPacket {
    Message(OscMessage),
    Bundle(OscBundle),
}

impl OscPacket {
    /// All messages in depth-first order.
    pub fn messages(&self) -> Vec<&OscMessage> {
        let mut out = Vec::new();
        fn walk<'a>(p: &'a OscPacket, out: &mut Vec<&'a OscMessage>) {
            match p {
                OscPacket::Message(m) => out.push(m),
                OscPacket::Bundle(b) => b.elements.iter().for_each(|e| walk(e, out)),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn into_messages(self) -> Vec<OscMessage> {
        match self {
            OscPacket::Message(m) => vec![m],
            OscPacket::Bundle(b) => b.elements.into_iter().flat_map(OscPacket::into_messages).collect(),
        }
    }
}

/// Address grammar: a leading `/`, then printable ASCII excluding space and
/// the pattern/reserved characters `# * , ? [ ] { }`.
pub fn validate_address(address: &str) -> Result<(), OscError> {
    if !address.starts_with('/') {
        return Err(OscError::Address(address.to_owned()));
    }
    let ok = address
        .bytes()
        .all(|b| b.is_ascii_graphic() && !matches!(b, b'#' | b'*' | b',' | b'?' | b'[' | b']' | b'{' | b'}'));
    if ok {
        Ok(())
    } else {
        Err(OscError::Address(address.to_owned()))
    }
}

fn pad4(len: usize) -> usize {
    (len + 3) & !3
}

fn push_padded_str(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(bytes);
    let total = pad4(bytes.len() + 1);
    buf.resize(buf.len() + (total - bytes.len()), 0);
}

pub fn encode_osc(msg: &OscMessage) -> Result<Vec<u8>, OscError> {
    let mut buf = Vec::with_capacity(64);
    encode_message_into(msg, &mut buf)?;
    Ok(buf)
}

pub fn encode_packet(packet: &OscPacket) -> Result<Vec<u8>, OscError> {
    let mut buf = Vec::with_capacity(128);
    encode_packet_into(packet, &mut buf)?;
    Ok(buf)
}

fn encode_packet_into(packet: &OscPacket, buf: &mut Vec<u8>) -> Result<(), OscError> {
    match packet {
        OscPacket::Message(m) => encode_message_into(m, buf),
        OscPacket::Bundle(b) => {
            buf.extend_from_slice(BUNDLE_TAG);
            buf.extend_from_slice(&b.timetag.0.to_be_bytes());
            for element in &b.elements {
                let size_at = buf.len();
                buf.extend_from_slice(&[0; 4]);
                encode_packet_into(element, buf)?;
                let size = i32::try_from(buf.len() - size_at - 4)
                    .map_err(|_| OscError::Type("bundle element too large".into()))?;
                buf[size_at..size_at + 4].copy_from_slice(&size.to_be_bytes());
            }
            Ok(())
        }
    }
}

fn encode_message_into(msg: &OscMessage, buf: &mut Vec<u8>) -> Result<(), OscError> {
    validate_address(&msg.address)?;
    push_padded_str(buf, msg.address.as_bytes());

    let mut tags = Vec::with_capacity(msg.args.len() + 1);
    tags.push(b',');
    tags.extend(msg.args.iter().map(OscArg::type_tag));
    push_padded_str(buf, &tags);

    for arg in &msg.args {
        match arg {
            OscArg::Int(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => buf.extend_from_slice(&v.to_bits().to_be_bytes()),
            OscArg::Str(s) => {
                if s.as_bytes().contains(&0) {
                    return Err(OscError::Type("string argument contains NUL".into()));
                }
                push_padded_str(buf, s.as_bytes());
            }
            OscArg::Blob(b) => {
                let len = i32::try_from(b.len()).map_err(|_| OscError::Type("blob too large".into()))?;
                buf.extend_from_slice(&len.to_be_bytes());
                buf.extend_from_slice(b);
                buf.resize(buf.len() + (pad4(b.len()) - b.len()), 0);
            }
        }
    }
    Ok(())
}

/// Decodes a message or bundle. Total over all inputs: any byte string
/// yields a packet or an error, never a panic.
pub fn decode_osc(packet: &[u8]) -> Result<OscPacket, OscError> {
    decode_at_depth(packet, 0)
}

fn decode_at_depth(packet: &[u8], depth: usize) -> Result<OscPacket, OscError> {
    if packet.is_empty() || packet.len() % 4 != 0 {
        return Err(OscError::Malformed("packet length is not a positive multiple of 4"));
    }
    if packet.starts_with(BUNDLE_TAG) {
        if depth >= MAX_BUNDLE_DEPTH {
            return Err(OscError::Malformed("bundles nested too deeply"));
        }
        decode_bundle(packet, depth).map(OscPacket::Bundle)
    } else {
        decode_message(packet).map(OscPacket::Message)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], OscError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(OscError::Malformed("truncated packet")),
        }
    }

    fn word(&mut self) -> Result<[u8; 4], OscError> {
        let s = self.take(4)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    fn padded_str(&mut self) -> Result<&'a [u8], OscError> {
        let rest = &self.data[self.pos..];
        let nul = rest.iter().position(|&b| b == 0).ok_or(OscError::Malformed("unterminated string"))?;
        let padded = self.take(pad4(nul + 1))?;
        if padded[nul..].iter().any(|&b| b != 0) {
            return Err(OscError::Malformed("non-zero string padding"));
        }
        Ok(&padded[..nul])
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

fn decode_message(packet: &[u8]) -> Result<OscMessage, OscError> {
    let mut c = Cursor { data: packet, pos: 0 };
    let address = std::str::from_utf8(c.padded_str()?)
        .map_err(|_| OscError::Malformed("address is not ASCII"))?
        .to_owned();
    if !address.starts_with('/') {
        return Err(OscError::Malformed("address must start with '/'"));
    }
    if c.remaining() == 0 {
        return Err(OscError::Malformed("missing type tag string"));
    }
    let tags = c.padded_str()?;
    let Some((&b',', tags)) = tags.split_first() else {
        return Err(OscError::Malformed("type tag string must start with ','"));
    };

    let mut args = Vec::with_capacity(tags.len());
    for &tag in tags {
        let arg = match tag {
            b'i' => OscArg::Int(i32::from_be_bytes(c.word()?)),
            b'f' => OscArg::Float(f32::from_bits(u32::from_be_bytes(c.word()?))),
            b's' => OscArg::Str(
                std::str::from_utf8(c.padded_str()?)
                    .map_err(|_| OscError::Malformed("string argument is not UTF-8"))?
                    .to_owned(),
            ),
            b'b' => {
                let len = i32::from_be_bytes(c.word()?);
                let len = usize::try_from(len).map_err(|_| OscError::Malformed("negative blob length"))?;
                if len > c.remaining() {
                    return Err(OscError::Malformed("truncated blob"));
                }
                let padded = c.take(pad4(len))?;
                OscArg::Blob(padded[..len].to_vec())
            }
            other => return Err(OscError::Type(format!("unsupported type tag '{}'", other.escape_ascii()))),
        };
        args.push(arg);
    }
    if c.remaining() != 0 {
        return Err(OscError::Malformed("trailing bytes after arguments"));
    }
    Ok(OscMessage { address, args })
}

fn decode_bundle(packet: &[u8], depth: usize) -> Result<OscBundle, OscError> {
    let mut c = Cursor { data: packet, pos: BUNDLE_TAG.len() };
    let tt = c.take(8)?;
    let timetag = TimeTag(u64::from_be_bytes(tt.try_into().expect("8 bytes")));
    let mut elements = Vec::new();
    while c.remaining() > 0 {
        let size = i32::from_be_bytes(c.word()?);
        let size = usize::try_from(size).map_err(|_| OscError::Malformed("negative bundle element size"))?;
        if size == 0 || size % 4 != 0 {
            return Err(OscError::Malformed("bundle element size must be a positive multiple of 4"));
        }
        let body = c.take(size)?;
        elements.push(decode_at_depth(body, depth + 1)?);
    }
    Ok(OscBundle { timetag, elements })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pillow_pressure_vector() {
        // Hand-encoded: 18 address bytes + NUL padded to 20, ",f" padded to 4,
        // then 0.5f32 big-endian.
        let mut expected = Vec::new();
        expected.extend_from_slice(b"/pillow/1/pressure\0\0");
        expected.extend_from_slice(b",f\0\0");
        expected.extend_from_slice(&[0x3F, 0x00, 0x00, 0x00]);
        assert_eq!(expected.len(), 28);

        let msg = OscMessage::new("/pillow/1/pressure", vec![OscArg::Float(0.5)]);
        assert_eq!(encode_osc(&msg).unwrap(), expected);
        assert_eq!(decode_osc(&expected).unwrap(), OscPacket::Message(msg));
    }

    #[test]
    fn ping_vector() {
        let expected = b"/ping\0\0\0,\0\0\0".to_vec();
        let msg = OscMessage::new("/ping", vec![]);
        assert_eq!(encode_osc(&msg).unwrap(), expected);
        assert_eq!(decode_osc(&expected).unwrap(), OscPacket::Message(msg));
    }

    #[test]
    fn immediate_bundle_delivers_its_message_once() {
        let inner = b"/ping\0\0\0,\0\0\0";
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"#bundle\0");
        bytes.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 1]);
        bytes.extend_from_slice(&(inner.len() as i32).to_be_bytes());
        bytes.extend_from_slice(inner);

        let packet = decode_osc(&bytes).unwrap();
        let OscPacket::Bundle(ref b) = packet else { panic!("expected bundle") };
        assert!(b.timetag.is_immediate());
        let msgs = packet.messages();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].address, "/ping");
        assert_eq!(encode_packet(&packet).unwrap(), bytes);
    }

    #[test]
    fn misaligned_and_truncated_packets() {
        assert!(matches!(decode_osc(b"/pi"), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b""), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b"/pin"), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b"/p\0\0,f\0\0"), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b"/p\0\0,b\0\0\x7f\xff\xff\xff"), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b"#bundle\0\0\0\0\0"), Err(OscError::Malformed(_))));
        assert!(matches!(decode_osc(b"/p\0\0,x\0\0"), Err(OscError::Type(_))));
    }

    #[test]
    fn deeply_nested_bundles_are_rejected() {
        let mut bytes = b"/p\0\0,\0\0\0".to_vec();
        for _ in 0..40 {
            let mut outer = b"#bundle\0".to_vec();
            outer.extend_from_slice(&1u64.to_be_bytes());
            outer.extend_from_slice(&(bytes.len() as i32).to_be_bytes());
            outer.extend_from_slice(&bytes);
            bytes = outer;
        }
        assert!(matches!(decode_osc(&bytes), Err(OscError::Malformed(_))));
    }

    #[test]
    fn address_grammar() {
        for bad in ["pillow", "/a b", "/a*", "/a?", "/a,b", "/[x]", "/{x}", "/#", "/é"] {
            assert!(validate_address(bad).is_err(), "{bad}");
        }
        for good in ["/", "/pillow/1/pressure", "/engine/meter/tape"] {
            assert!(validate_address(good).is_ok(), "{good}");
        }
        let msg = OscMessage::new("/x", vec![OscArg::Str("a\0b".into())]);
        assert!(matches!(encode_osc(&msg), Err(OscError::Type(_))));
    }

    #[test]
    fn all_argument_types_round_trip() {
        let msg = OscMessage::new(
            "/mixed",
            vec![
                OscArg::Int(-7),
                OscArg::Float(1032.5),
                OscArg::Str("abc".into()),
                OscArg::Str(String::new()),
                OscArg::Blob(vec![1, 2, 3, 4, 5]),
                OscArg::Blob(vec![]),
            ],
        );
        let bytes = encode_osc(&msg).unwrap();
        assert_eq!(bytes.len() % 4, 0);
        assert_eq!(decode_osc(&bytes).unwrap(), OscPacket::Message(msg));
    }
}
