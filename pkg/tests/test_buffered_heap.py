import math

import pytest

from pqlab import BufferedHeap, Device, DeviceConfig
from pqlab.errors import CapabilityError, ConfigError, EmptyQueueError
from pqlab.pq.base import run_workload
from pqlab.workload import make_random_workload

from conftest import drive


def make(B=16, M=192, w=64, n_hint=2048):
    dev = Device(DeviceConfig(B=B, M=M, w=w))
    return BufferedHeap(dev, n_hint=n_hint), dev


def test_singleton_roundtrip():
    q, _ = make()
    q.insert(5, 10)
    assert q.extract_min() == (5, 10)
    with pytest.raises(EmptyQueueError):
        q.extract_min()


def test_sorted_inserts_extract_in_order():
    q, _ = make()
    for k in range(200):
        q.insert(k, k)
    assert [q.extract_min() for _ in range(200)] == [(k, k) for k in range(200)]


def test_reverse_inserts_extract_in_order():
    q, _ = make()
    for k in range(200):
        q.insert(k, 199 - k)
    got = [q.extract_min() for _ in range(200)]
    assert got == [(199 - p, p) for p in range(200)]


def test_no_delete_support():
    q, _ = make()
    with pytest.raises(CapabilityError):
        q.delete(1)
    with pytest.raises(CapabilityError):
        q.decrease_key(1, 1)


def test_memory_too_small_rejected():
    dev = Device(DeviceConfig(B=64, M=128, w=64))
    with pytest.raises(ConfigError):
        BufferedHeap(dev, n_hint=1 << 14)


@pytest.mark.parametrize("seed", range(12))
def test_matches_oracle_transcript(seed):
    wl = make_random_workload(2500, seed, universe=600, profile="insert_extract")
    q, dev = make()
    run_workload(q, dev, wl)  # raises DivergenceError on any mismatch


@pytest.mark.parametrize("cfg", [(8, 160, 512), (16, 192, 1024), (64, 1024, 8192), (32, 512, 2048)])
def test_matches_oracle_across_geometries(cfg):
    B, M, nh = cfg
    wl = make_random_workload(3000, 99, universe=700, profile="insert_extract")
    dev = Device(DeviceConfig(B=B, M=M, w=64))
    run_workload(BufferedHeap(dev, n_hint=nh), dev, wl)


def test_snapshot_resume_identical_probes():
    wl = make_random_workload(1200, 7, universe=400, profile="insert_extract")
    q, dev = make()
    half = len(wl.ops) // 2
    drive(q, wl.ops[:half])
    img = q.memory_image()
    dev2 = dev.copy()
    q2 = BufferedHeap(dev2, n_hint=2048)
    q2.load_memory_image(img)
    tail1 = drive(q, wl.ops[half:])
    tail2 = drive(q2, wl.ops[half:])
    assert tail1 == tail2
    suffix = [(r.addr, r.access) for r in dev.log[len(dev.log) - len(dev2.log):]]
    assert suffix == [(r.addr, r.access) for r in dev2.log]


def test_clear_resets_behavior():
    q, dev = make()
    for k in range(100):
        q.insert(k, k)
    q.clear()
    with pytest.raises(EmptyQueueError):
        q.extract_min()
    q.insert(1, 1)
    assert q.extract_min() == (1, 1)


def test_probe_envelope_insert_then_extract():
    # Regression bound with documented constant c=20 (see module docstring);
    # c'=0 at this scale. Not a proof, a tripwire.
    n = 1 << 12
    B, M = 32, 512
    dev = Device(DeviceConfig(B=B, M=M, w=64))
    q = BufferedHeap(dev, n_hint=n)
    for k in range(n // 2):
        q.insert(k * 7919 % (n // 2), k)
    for _ in range(n // 2):
        q.extract_min()
    bound = 20 * (n / B) * (1 + math.log(max(n, M) / M, M / B))
    assert dev.probe_count <= bound
