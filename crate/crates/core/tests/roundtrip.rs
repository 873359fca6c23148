//! Encode/decode bijection properties over randomly generated wire messages.

use std::collections::BTreeMap;

use proptest::prelude::*;

use keymesh_core::{
    decode, encode, AckBatch, AckContainer, AckStatus, EncryptedEnvelope, ExtKeyContainer,
    ExtensionRecord, KeyBlock, KeyContainer, SaeId, VoidKeysContainer, ENVELOPE_NONCE_LEN,
    WIRE_VERSION,
};

fn arb_sae_id() -> impl Strategy<Value = SaeId> {
    "[a-zA-Z0-9_.-]{1,32}".prop_map(|s| SaeId::new(s).unwrap())
}

fn arb_uuid() -> impl Strategy<Value = String> {
    any::<u128>().prop_map(|n| uuid::Uuid::from_u128(n).to_string())
}

fn arb_key_block() -> impl Strategy<Value = KeyBlock> {
    (arb_uuid(), proptest::collection::vec(any::<u8>(), 1..64))
        .prop_map(|(id, material)| KeyBlock::new(id, material).unwrap())
}

fn arb_envelope() -> impl Strategy<Value = EncryptedEnvelope> {
    (
        proptest::collection::vec(any::<u8>(), ENVELOPE_NONCE_LEN),
        proptest::collection::vec(any::<u8>(), 0..128),
        "[a-zA-Z0-9-]{1,40}",
        proptest::option::of(arb_sae_id()),
    )
        .prop_map(|(iv, ciphertext, session, sae)| EncryptedEnvelope {
            iv,
            ciphertext,
            session,
            sae,
        })
}

fn arb_extension() -> impl Strategy<Value = ExtensionRecord> {
    ("[a-z0-9_]{1,16}", proptest::option::of(any::<i64>())).prop_map(|(name, data)| {
        ExtensionRecord {
            name,
            data: data.map(|n| serde_json::json!({ "value": n })),
        }
    })
}

fn arb_ext_container() -> impl Strategy<Value = ExtKeyContainer> {
    (
        proptest::collection::vec(arb_key_block(), 0..4),
        arb_sae_id(),
        proptest::collection::vec(arb_sae_id(), 1..4),
        proptest::collection::vec(arb_extension(), 0..3),
        proptest::collection::vec(arb_extension(), 0..3),
    )
        .prop_map(|(keys, owner, targets, mandatory, optional)| ExtKeyContainer {
            version: WIRE_VERSION.into(),
            keys,
            owner_master_sae_id: owner,
            target_sae_ids: targets,
            ack_callback_url: "https://127.0.0.1:7001/api/v1/ack_containers".into(),
            extension_mandatory: mandatory,
            extension_optional: optional,
        })
}

fn arb_ack_batch() -> impl Strategy<Value = AckBatch> {
    proptest::collection::vec(
        (
            proptest::collection::vec(arb_uuid(), 1..4),
            prop_oneof![
                Just(AckStatus::Relayed),
                Just(AckStatus::Voided),
                Just(AckStatus::Failed),
                Just(AckStatus::KeyNotPresent),
            ],
            arb_sae_id(),
            proptest::option::of(any::<u32>()),
        )
            .prop_map(|(key_ids, ack_status, initiator, note)| AckContainer {
                key_ids,
                ack_status,
                initiator_sae_id: initiator,
                message: note.map(|n| {
                    BTreeMap::from([("note".to_string(), serde_json::json!(n))])
                }),
            }),
        0..4,
    )
    .prop_map(|acks| AckBatch {
        version: WIRE_VERSION.into(),
        acks,
    })
}

fn arb_key_container() -> impl Strategy<Value = KeyContainer> {
    proptest::collection::vec(arb_key_block(), 1..5)
        .prop_map(|blocks| KeyContainer::from_blocks(blocks.iter()))
}

fn arb_void_keys() -> impl Strategy<Value = VoidKeysContainer> {
    (proptest::collection::vec(arb_uuid(), 1..5), arb_sae_id()).prop_map(|(key_ids, initiator)| {
        VoidKeysContainer {
            version: WIRE_VERSION.into(),
            key_ids,
            initiator_sae_id: initiator,
            ack_callback_url: "https://127.0.0.1:7001/api/v1/ack_containers".into(),
        }
    })
}

macro_rules! roundtrip_prop {
    ($name:ident, $ty:ty, $strategy:expr) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn $name(msg in $strategy) {
                let bytes = encode(&msg);
                let decoded: $ty = decode(&bytes).expect("decode of encoded message");
                prop_assert_eq!(&decoded, &msg);
                // Canonical form is a fixed point.
                prop_assert_eq!(encode(&decoded), bytes);
            }
        }
    };
}

roundtrip_prop!(envelope_roundtrip, EncryptedEnvelope, arb_envelope());
roundtrip_prop!(ext_container_roundtrip, ExtKeyContainer, arb_ext_container());
roundtrip_prop!(ack_batch_roundtrip, AckBatch, arb_ack_batch());
roundtrip_prop!(key_container_roundtrip, KeyContainer, arb_key_container());
roundtrip_prop!(void_keys_roundtrip, VoidKeysContainer, arb_void_keys());
