use optocloud::energy::{
    total_power, BillOfMaterials, ComponentKind, ComponentPowerTable, PowerFixture, Scope,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn bom_from(counts: &[u32]) -> BillOfMaterials {
    let c: BTreeMap<ComponentKind, u32> = ComponentKind::ALL
        .into_iter()
        .zip(counts.iter().copied())
        .collect();
    BillOfMaterials([(Scope::ComputeOnly, c)].into_iter().collect())
}

proptest! {
    #[test]
    fn totals_are_additive(a in prop::collection::vec(0u32..20, 9), b in prop::collection::vec(0u32..20, 9)) {
        let table: ComponentPowerTable = PowerFixture::default_fixture().table;
        let (ba, bb) = (bom_from(&a), bom_from(&b));
        let ta = total_power(&table, &ba, Scope::ComputeOnly).unwrap().total_mw;
        let tb = total_power(&table, &bb, Scope::ComputeOnly).unwrap().total_mw;
        let tab = total_power(&table, &ba.merged(&bb), Scope::ComputeOnly).unwrap().total_mw;
        prop_assert!((tab - ta - tb).abs() < 1e-9);
        prop_assert!(ta >= 0.0);
    }
}

#[test]
fn scopes_nest_in_the_default_fixture() {
    let f = PowerFixture::default_fixture();
    let totals: Vec<f64> = Scope::ALL
        .iter()
        .map(|&s| total_power(&f.table, &f.bom, s).unwrap().total_mw)
        .collect();
    assert!(totals.windows(2).all(|w| w[0] <= w[1]));
    assert!(f.notes.iter().all(|n| !n.is_empty()));
}
