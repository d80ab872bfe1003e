use isingtri::enumerator::Oracle;
use isingtri::series::{extend_table, PartitionTable};

#[test]
fn series_matches_brute_force_up_to_order_8() {
    let table = extend_table(PartitionTable::exact(), 8).unwrap();
    let mut oracle = Oracle::new(8);
    for s in 1..=6 {
        for p in 0..=s {
            let q = s - p;
            for n in 0..=8 {
                assert_eq!(table.entry(p, q, n), oracle.z(p, q, n).unwrap(), "({p},{q},{n})");
            }
        }
    }
}
