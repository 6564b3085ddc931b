use super::*;
use crate::crc24q::crc24q_verify;
use proptest::prelude::*;

fn schema() -> MessageSchema {
    MessageSchema::default()
}

fn round_trip(c: &MessageContent) -> MessageContent {
    let bits = serialize_message(c, &schema()).unwrap();
    assert_eq!(bits.len(), MESSAGE_BITS);
    match parse_message(&bits, &schema(), 59).unwrap() {
        Parsed::Message(m) => {
            assert_eq!(m.mestype, c.mestype());
            assert_eq!(m.epoch, c.epoch());
            m.content
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn null_message() {
    let bits = serialize_message(&MessageContent::Null, &schema()).unwrap();
    assert_eq!(&bits[..6], &[1, 1, 1, 1, 1, 1]);
    assert!(crc24q_verify(&bits[..462], Crc24::from_bits(&bits[462..])).unwrap());
    assert_eq!(round_trip(&MessageContent::Null), MessageContent::Null);
}

#[test]
fn mask_round_trip() {
    let bds: BTreeSet<u8> = [19, 21, 22, 29, 34, 35, 38, 39, 40, 44].into();
    let gps: BTreeSet<u8> = [2, 5, 6, 7, 9, 12, 13, 15, 18, 19, 25, 29, 30].into();
    let m = MessageContent::Mask(SatelliteMask { epoch: 17710, iod_ssr: 1, iodp: 3, bds: bds.clone(), gps });
    let back = round_trip(&m);
    assert_eq!(back, m);
    let MessageContent::Mask(b) = back else { unreachable!() };
    assert_eq!(b.bds, bds);
}

#[test]
fn sentinel_means_unavailable() {
    let s = schema();
    let l = s.layout(2).unwrap();
    let mut raw = RawFields::default();
    raw.fields.insert("epoch".into(), 100);
    let mut rec = BTreeMap::new();
    rec.insert("sat_slot".into(), 19);
    rec.insert("radial".into(), -16384);
    rec.insert("along".into(), 10);
    raw.records.push(rec);
    let mut body: Vec<u8> = vec![0, 0, 0, 0, 1, 0];
    body.extend(l.encode(&raw).unwrap());
    let bits = crate::crc24q::append_crc(&body);
    let Parsed::Message(m) = parse_message(&bits, &s, 59).unwrap() else { panic!() };
    let MessageContent::Orbit(o) = m.content else { panic!() };
    assert_eq!(o.records.len(), 1);
    assert_eq!(o.records[0].delta, None);
}

#[test]
fn zero_clock_preserved() {
    let c = MessageContent::Clock(ClockMessage {
        epoch: 18000,
        iod_ssr: 0,
        iodp: 2,
        records: vec![ClockCorrection { sat: SatId::gps(5), iod: 3, c0: Some(0.0) }],
    });
    assert_eq!(round_trip(&c), c);
}

#[test]
fn crc_checked_first() {
    let mut bits = serialize_message(&MessageContent::Null, &schema()).unwrap();
    bits[100] ^= 1;
    assert!(matches!(parse_message(&bits, &schema(), 59), Err(MsgError::Crc { .. })));
    assert_eq!(parse_message(&bits[..10], &schema(), 59), Err(MsgError::BodyLength(10)));
}

#[test]
fn unknown_types_are_classified() {
    for (t, class) in [(5u8, MessageClass::Unimplemented), (7, MessageClass::Unimplemented), (8, MessageClass::Reserved), (62, MessageClass::Reserved), (0, MessageClass::Reserved)] {
        let mut body: Vec<u8> = (0..6).rev().map(|i| t >> i & 1).collect();
        body.extend(vec![0u8; DATA_BITS]);
        let bits = crate::crc24q::append_crc(&body);
        assert_eq!(parse_message(&bits, &schema(), 59).unwrap(), Parsed::Skipped { mestype: t, class });
    }
}

#[test]
fn schema_without_layout_is_config_error() {
    let s = MessageSchema::parse("type 1\nepoch 17 unsigned 1 s\niod_ssr 2 unsigned 1 -\niodp 4 unsigned 1 -\nbds_mask 63 unsigned 1 -\ngps_mask 37 unsigned 1 -\nreserved 333 unsigned 1 -\n").unwrap();
    let clock = MessageContent::Clock(ClockMessage { epoch: 1, iod_ssr: 0, iodp: 0, records: vec![] });
    let bits = serialize_message(&clock, &schema()).unwrap();
    assert_eq!(parse_message(&bits, &s, 59), Err(MsgError::MissingLayout(4)));
}

#[test]
fn serializer_range_errors() {
    let big = MessageContent::Clock(ClockMessage {
        epoch: 1,
        iod_ssr: 0,
        iodp: 0,
        records: vec![ClockCorrection { sat: SatId::bds(1), iod: 0, c0: Some(40.0) }],
    });
    assert!(matches!(serialize_message(&big, &schema()), Err(MsgError::OutOfRange { .. })));
    let many = MessageContent::Clock(ClockMessage {
        epoch: 1,
        iod_ssr: 0,
        iodp: 0,
        records: (1..=16).map(|p| ClockCorrection { sat: SatId::bds(p), iod: 0, c0: None }).collect(),
    });
    assert_eq!(serialize_message(&many, &schema()), Err(MsgError::Capacity { mestype: 4, count: 16, capacity: 15 }));
    let bad_mode = MessageContent::Bias(BiasMessage {
        epoch: 1,
        iod_ssr: 0,
        records: vec![CodeBias { sat: SatId::bds(1), entries: vec![BiasEntry { mode: 3, bias: Some(0.0) }] }],
    });
    assert!(matches!(serialize_message(&bad_mode, &schema()), Err(MsgError::OutOfRange { .. })));
}

#[test]
fn slot_mapping() {
    assert_eq!(SatId::from_slot(0), None);
    assert_eq!(SatId::from_slot(1), Some(SatId::bds(1)));
    assert_eq!(SatId::from_slot(63), Some(SatId::bds(63)));
    assert_eq!(SatId::from_slot(64), Some(SatId::gps(1)));
    assert_eq!(SatId::from_slot(174), Some(SatId::new(System::Glonass, 37)));
    assert_eq!(SatId::from_slot(175), None);
    for slot in 1..=174 {
        assert_eq!(SatId::from_slot(slot).unwrap().slot(), Some(slot));
    }
}

fn sat() -> impl Strategy<Value = SatId> {
    prop_oneof![(1u8..=63).prop_map(SatId::bds), (1u8..=37).prop_map(SatId::gps)]
}

fn scaled(scale: f64, bits: u32) -> impl Strategy<Value = Option<f64>> {
    let m = (1i32 << (bits - 1)) - 1;
    prop_oneof![1 => Just(None), 9 => (-m..=m).prop_map(move |c| Some(c as f64 * scale))]
}

fn content() -> impl Strategy<Value = MessageContent> {
    let epoch = 0u32..86400;
    let mask = (epoch.clone(), 0u8..4, 0u8..16, proptest::collection::btree_set(1u8..=63, 0..20), proptest::collection::btree_set(1u8..=37, 0..20))
        .prop_map(|(epoch, iod_ssr, iodp, bds, gps)| MessageContent::Mask(SatelliteMask { epoch, iod_ssr, iodp, bds, gps }));
    let delta = (scaled(0.0016, 15), scaled(0.0016, 15), scaled(0.0016, 15))
        .prop_map(|(r, a, c)| Some(OrbitDelta { radial: r?, along: a?, cross: c? }));
    let orbit = (epoch.clone(), 0u8..4, proptest::collection::vec((sat(), 0u8..16, delta, 0u8..64), 0..=6)).prop_map(
        |(epoch, iod_ssr, recs)| {
            let records =
                recs.into_iter().map(|(sat, iod, delta, ura_index)| OrbitCorrection { sat, iod, delta, ura_index }).collect();
            MessageContent::Orbit(OrbitMessage { epoch, iod_ssr, records })
        },
    );
    let modes = [0u8, 1, 2, 4, 5, 7, 8, 12];
    let entry = (proptest::sample::select(modes.to_vec()), scaled(0.017, 12)).prop_map(|(mode, bias)| BiasEntry { mode, bias });
    let bias = (epoch.clone(), 0u8..4, proptest::collection::btree_map(sat(), proptest::collection::vec(entry, 1..4), 0..6))
        .prop_filter_map("capacity", |(epoch, iod_ssr, m)| {
            let records: Vec<CodeBias> = m.into_iter().map(|(sat, entries)| CodeBias { sat, entries }).collect();
            (records.iter().map(|r| r.entries.len()).sum::<usize>() <= 17)
                .then_some(MessageContent::Bias(BiasMessage { epoch, iod_ssr, records }))
        });
    let clock = (epoch, 0u8..4, 0u8..16, proptest::collection::vec((sat(), 0u8..16, scaled(0.0016, 15)), 0..=15)).prop_map(
        |(epoch, iod_ssr, iodp, recs)| {
            let records = recs.into_iter().map(|(sat, iod, c0)| ClockCorrection { sat, iod, c0 }).collect();
            MessageContent::Clock(ClockMessage { epoch, iod_ssr, iodp, records })
        },
    );
    prop_oneof![mask, orbit, bias, clock, Just(MessageContent::Null)]
}

proptest! {
    #[test]
    fn serialize_parse_bijection(c in content()) {
        prop_assert_eq!(round_trip(&c), c.clone());
        // And the bit stream itself is canonical.
        let bits = serialize_message(&c, &schema()).unwrap();
        let Parsed::Message(m) = parse_message(&bits, &schema(), 60).unwrap() else { panic!() };
        prop_assert_eq!(serialize_message(&m.content, &schema()).unwrap(), bits);
    }
}
