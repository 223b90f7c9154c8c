//! Plain-text number formatting shared by every CSV writer.

use serde::Serialize;

use crate::flow::Trajectory;

/// Twelve significant digits in scientific notation; empty for `None`.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Compact JSON with every float written like [`num`]; non-finite values
/// become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    struct Sci;
    impl serde_json::ser::Formatter for Sci {
        fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
            w.write_all(num(v).as_bytes())
        }
        fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
            self.write_f64(w, v as f64)
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci);
    value.serialize(&mut ser).expect("in-memory serialisation");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,x,r\n");
    for (t, s) in tr.times.iter().zip(&tr.states) {
        out.push_str(&format!("{},{},{}\n", num(*t), num(s.x), num(s.r)));
    }
    out
}
