use oapsim_core::codec::{Absorb, DecoderState, DegreeDistribution, Encoder, Page};
use oapsim_core::galois::{Field, FieldSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fields() -> impl Strategy<Value = (Field, DegreeDistribution)> {
    prop_oneof![
        Just((Field::gf2(), DegreeDistribution::UniformRlc)),
        Just((Field::gf256(), DegreeDistribution::UniformRlc)),
        Just((Field::gf2(), DegreeDistribution::default_lt())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_decodes_to_source((field, dist) in fields(), k in 1usize..24, len in 1usize..32, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let page = Page::random(3, k, len, &mut rng);
        let enc = Encoder::new(field.clone(), dist, k).unwrap();
        let mut dec = DecoderState::new(field, 3, k, len);
        let mut sent = 0;
        while !dec.is_complete() {
            dec.absorb(&enc.encode(&page, &mut rng)).unwrap();
            sent += 1;
            prop_assert!(sent < 50 * k + 100);
        }
        prop_assert_eq!(dec.decode().unwrap(), page);
    }

    #[test]
    fn relayed_codewords_stay_in_span(k in 2usize..16, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = Field::new(FieldSpec::GF256);
        let page = Page::random(0, k, 8, &mut rng);
        let enc = Encoder::new(field.clone(), DegreeDistribution::UniformRlc, k).unwrap();
        let mut relay = DecoderState::new(field.clone(), 0, k, 8);
        for _ in 0..k / 2 {
            relay.absorb(&enc.encode(&page, &mut rng)).unwrap();
        }
        let mut sink = DecoderState::new(field, 0, k, 8);
        for _ in 0..4 * k {
            let cw = relay.recode(&mut rng).unwrap();
            sink.absorb(&cw).unwrap();
            prop_assert!(sink.rank() <= relay.rank());
            prop_assert_eq!(relay.clone().absorb(&cw).unwrap(), Absorb::Redundant);
        }
    }
}
