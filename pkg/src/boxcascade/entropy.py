"""Counter-based entropy shared by every execution backend.

A node of the infinite tree is identified by a 64-bit path key obtained by
folding child indices into the parent key with one `mix64` round per edge.
Every random decision is a pure function of (seed, path key, counter), so the
tree is lazily expandable, replayable, and identical draws can be re-derived
in any order.  The three backends (pure Python here, numba scalars, vectorized
numpy) implement the exact same integer pipeline bit for bit.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF

# splitmix64 finalizer constants
GOLD = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

# distinct odd multipliers / salts for the independent stream layers
M_CHILD = 0xD1B54A32D192ED03
M_STREAM = 0x8CB92BA72F3D8DD7
M_BIN = 0xACF1239DA1B3E53B
SALT_ENV = 0x243F6A8885A308D3
SALT_BALL = 0x13198A2E03707344
SALT_ROOT = 0xBE5466CF34E90C6C
SALT_POISSON = 0x082EFA98EC4E6C89

UNIT_SCALE = 1.0 / 9007199254740992.0  # 2**-53

# law identifiers used by the kernels (see laws.py for the public registry)
LAW_UNIFORM_STICK = 0
LAW_DIRAC_HALF = 1
LAW_MIX23 = 2
LAW_075U = 3
LAW_HEAVYTAIL = 4

LAW_WIDTHS = (2, 2, 3, 16, 2)


def mix64(z: int) -> int:
    """splitmix64 finalizer on 64-bit ints (reference implementation)."""
    z = (z + GOLD) & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def unit(z: int) -> float:
    """Map a 64-bit word to a float in the open interval (0, 1)."""
    return ((z >> 11) + 0.5) * UNIT_SCALE


def root_key() -> int:
    return mix64(SALT_ROOT)


def child_key(pkey: int, j: int) -> int:
    """Path key of child j (0-based) of the node with path key ``pkey``."""
    return mix64(pkey ^ (((j + 1) * M_CHILD) & MASK64))


def env_mix(env_seed: int) -> int:
    return mix64((env_seed & MASK64) ^ SALT_ENV)


def ball_mix(ball_seed: int) -> int:
    return mix64((ball_seed & MASK64) ^ SALT_BALL)


def node_key(pkey: int, layer_mix: int) -> int:
    return mix64(pkey ^ layer_mix)


def stream_u64(key: int, t: int) -> int:
    """t-th 64-bit word of the stream attached to ``key``."""
    return mix64(key ^ (((t + 1) * M_STREAM) & MASK64))


def stream_unit(key: int, t: int) -> float:
    return unit(stream_u64(key, t))


def binomial_key(ball_node_key: int, j: int) -> int:
    """Entropy key for the count split toward child j of one node."""
    return mix64(ball_node_key ^ (((j + 1) * M_BIN) & MASK64))


def derive_seed(base: int, *parts: int, salt: int = 0) -> int:
    """Chain-derive an independent 64-bit seed from a base seed and indices."""
    k = mix64((base & MASK64) ^ (salt & MASK64))
    for p in parts:
        k = mix64((k + (p & MASK64)) & MASK64)
    return k
