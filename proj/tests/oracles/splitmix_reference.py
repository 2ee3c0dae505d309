"""Independent reference for the keyed SplitMix64 stream used by
synthetic_extract. Prints the values frozen into test_footage_library.cpp.

    python3 tests/oracles/splitmix_reference.py
"""

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def fnv1a64(data: bytes):
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def keyed_stream(seed, key: str, tag):
    s0 = mix64(seed ^ fnv1a64(key.encode()))
    state = mix64((s0 + GOLDEN * (tag + 1)) & MASK)
    while True:
        state = (state + GOLDEN) & MASK
        yield mix64(state)


def synthetic_extract(seed, key, modality_tag, dim):
    gen = keyed_stream(seed, key, modality_tag)
    # (x >> 11) * 2^-53 is exact in binary64, as is 2u - 1 for u in [0, 1).
    return [2.0 * ((next(gen) >> 11) / float(1 << 53)) - 1.0 for _ in range(dim)]


if __name__ == "__main__":
    for v in synthetic_extract(7, "a", 0, 8):
        print(repr(v))
