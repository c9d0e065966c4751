mod common;

#[test]
fn sets_match_geometry_on_random_fields() {
    let bad = common::neighborhood_mismatches(7, 60);
    assert!(
        bad.is_empty(),
        "{} mismatches, first: {:?}",
        bad.len(),
        &bad[..bad.len().min(5)]
    );
}

#[test]
fn expired_neighbors_are_not_reported() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut saw_expired = false;
    for _ in 0..50 {
        let net = common::Net::random(&mut rng);
        for x in 0..net.len() {
            let stale: Vec<_> = net
                .radio(x)
                .into_iter()
                .filter(|&y| common::NOW - net.heard[y] > common::EXPIRY)
                .collect();
            saw_expired |= !stale.is_empty();
            let mut table = net.table(x);
            let evicted = table.evict_expired(common::NOW);
            assert_eq!(evicted.len(), stale.len());
            assert_eq!(table.one_hop_set(common::NOW), net.n1(x));
        }
    }
    assert!(saw_expired);
}
