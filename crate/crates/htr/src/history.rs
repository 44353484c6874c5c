//! Loss curves as CSV: `epoch,split,loss,lr,position,seed`.

use std::fmt::Write as _;

use htr_core::model::{AttentionPosition, EpochRecord};

pub const HEADER: &str = "epoch,split,loss,lr,position,seed";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub position: AttentionPosition,
    pub record: EpochRecord,
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let rec = &r.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            rec.epoch,
            rec.split.name(),
            rec.loss,
            rec.lr,
            r.position.name(),
            r.seed
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use htr_core::model::Split;

    #[test]
    fn header_and_row_layout() {
        let rows = [Row {
            seed: 3,
            position: AttentionPosition::AfterRecurrent,
            record: EpochRecord {
                epoch: 1,
                split: Split::Val,
                loss: 2.5,
                lr: 0.001,
            },
        }];
        assert_eq!(
            to_csv(&rows),
            "epoch,split,loss,lr,position,seed\n1,val,2.5,0.001,after_recurrent,3\n"
        );
    }
}
