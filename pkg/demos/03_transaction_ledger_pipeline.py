#!/usr/bin/env python3
"""Walkthrough: sensor readings become transactions, get vetted by the
contract, wait in the pending room or get mined into the hash chain, and any
tampering is caught afterwards.

Run:  python demos/03_transaction_ledger_pipeline.py
"""

import json

from distb import blockchain as bc

contract = bc.ContractState(known_sensors={"s-01", "s-02"})
ledger = bc.Ledger(t_pending_ms=30_000)
store = bc.BlockStore()

bc.append_block(ledger, bc.mine_block([], bc.ZERO_HASH, 8, 0, 0))
print(f"genesis sealed: nonce={ledger.blocks[0].nonce} hash={ledger.blocks[0].hash.hex()[:16]}...")

# A well-formed reading from a registered sensor.
tx = bc.make_transaction("s-01", "bs", b'{"temp": 21.4}', now=100)
print("\ndisplay form:", json.dumps(bc.tx_display_dict(tx), indent=2)[:180], "...")
verdict = bc.verify_transaction(tx, contract)
bc.admit_or_park(ledger, tx, verdict, now=100)
print("registered sensor  ->", verdict.status)

# Unknown sender: parked, then promoted once the sensor registers.
stranger = bc.make_transaction("s-77", "bs", b"hello?", now=120)
bc.admit_or_park(ledger, stranger, bc.verify_transaction(stranger, contract), now=120)
print("unknown sensor     -> parked:", len(ledger.pending) == 1)
contract.register("s-77")
bc.expire_pending(ledger, contract, now=5000)
print("after registration -> promoted to queue:", len(ledger.queued) == 2)

# Tampered payload with a stale checksum: rejected outright.
forged = bc.Transaction(
    tx_id=tx.tx_id, sensor_id=tx.sensor_id, destination=tx.destination,
    timestamp=tx.timestamp, payload=b'{"temp": 99.9}', checksum=tx.checksum,
)
print("tampered payload   ->", bc.verify_transaction(forged, contract).status)

# Mine the queue, commit to content-addressed storage.
block = bc.mine_block(list(ledger.queued), ledger.tip_hash, 8, now=6000, index=1)
bc.append_block(ledger, block)
rid = bc.commit_to_storage(ledger, block, store)
print(f"\nblock 1 mined: nonce={block.nonce} txs={len(block.tx_list)} storage_id={rid[:16]}...")
print("chain valid:", bc.validate_chain(ledger))

# Flip one byte anywhere and validation names the first bad block.
export = bc.export_ledger(ledger)
lines = export.splitlines()
doc = json.loads(lines[1])
doc["txs"][0]["payload_hex"] = "00" + doc["txs"][0]["payload_hex"][2:]
lines[1] = json.dumps(doc, sort_keys=True)
ok, bad = bc.validate_chain(bc.load_ledger("\n".join(lines)))
print(f"after 1-byte tamper: valid={ok} first_bad_index={bad}")

# Stake-weighted sealing as the alternative consensus.
counts = {"A": 0, "B": 0}
for seed in range(1000):
    counts[bc.select_validator({"A": 3.0, "B": 1.0}, seed)] += 1
print(f"\nstake 3:1 over 1000 seeded draws -> {counts}")
print("gas for batches of 3 and 24:", bc.gas_for(3), bc.gas_for(24))
