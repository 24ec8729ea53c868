# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot kernel. Draw order must stay identical to ``_simcore_py``."""

from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, calloc, free


cdef struct Xoshiro:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t _splitmix64(uint64_t* x) nogil:
    x[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    cdef uint64_t z = x[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _seed(Xoshiro* g, uint64_t seed) nogil:
    cdef uint64_t x = seed
    g.s0 = _splitmix64(&x)
    g.s1 = _splitmix64(&x)
    g.s2 = _splitmix64(&x)
    g.s3 = _splitmix64(&x)


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _next(Xoshiro* g) nogil:
    cdef uint64_t result = _rotl(g.s1 * 5, 7) * 9
    cdef uint64_t t = g.s1 << 17
    g.s2 ^= g.s0
    g.s3 ^= g.s1
    g.s1 ^= g.s2
    g.s0 ^= g.s3
    g.s2 ^= t
    g.s3 = _rotl(g.s3, 45)
    return result


cdef inline double _uniform(Xoshiro* g) nogil:
    return <double>(_next(g) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int64_t _below(Xoshiro* g, int64_t n) nogil:
    return <int64_t>(_uniform(g) * <double>n)


def raw_stream(seed, count):
    cdef Xoshiro g
    _seed(&g, <uint64_t>seed)
    return [_next(&g) for _ in range(count)]


def run_slots(int n, int m, int w, int c, double alpha, double p_d, double p_f,
              long long slots, long long warmup, seed, bint shared_pu=True):
    cdef Xoshiro g
    _seed(&g, <uint64_t>seed)

    cdef int views = 1 if shared_pu else n
    # occ[v * c + ch]: PU occupancy of channel ch as seen by view v
    cdef char* occ = <char*>calloc(views * c, sizeof(char))
    cdef int* stage = <int*>calloc(n, sizeof(int))
    cdef int64_t* counter = <int64_t*>calloc(n, sizeof(int64_t))
    cdef int* chosen = <int*>calloc(n, sizeof(int))
    cdef int* txlist = <int*>calloc(n, sizeof(int))
    cdef int64_t* per_station = <int64_t*>calloc(n, sizeof(int64_t))
    cdef int* idle_list = <int*>calloc(c, sizeof(int))
    cdef int* tx_count = <int*>calloc(c, sizeof(int))
    if not (occ and stage and counter and chosen and txlist and per_station
            and idle_list and tx_count):
        free(occ); free(stage); free(counter); free(chosen); free(txlist)
        free(per_station); free(idle_list); free(tx_count)
        raise MemoryError()

    cdef int64_t attempts = 0, successes = 0, collisions = 0
    cdef int64_t idle_slots = 0, blocked_slots = 0, measured = 0
    cdef int64_t pu_overlaps = 0, occupied_channel_slots = 0
    cdef long long t
    cdef int st, ch, n_idle, n_tx, pick, any_unblocked, n_occ, j, v, base
    cdef double thr
    cdef bint measure

    with nogil:
        for ch in range(views * c):
            occ[ch] = _uniform(&g) < alpha
        for st in range(n):
            counter[st] = _below(&g, w)

        for t in range(slots):
            for v in range(views):
                if c > 1:
                    ch = <int>_below(&g, c)
                else:
                    ch = 0
                occ[v * c + ch] = _uniform(&g) < alpha
            for ch in range(c):
                tx_count[ch] = 0
            n_tx = 0
            any_unblocked = 0
            for st in range(n):
                base = 0 if shared_pu else st * c
                n_idle = 0
                for ch in range(c):
                    thr = p_d if occ[base + ch] else p_f
                    if not (_uniform(&g) < thr):
                        idle_list[n_idle] = ch
                        n_idle += 1
                if n_idle == 0:
                    continue
                any_unblocked = 1
                if counter[st] > 0:
                    counter[st] -= 1
                else:
                    if n_idle > 1:
                        pick = idle_list[_below(&g, n_idle)]
                    else:
                        pick = idle_list[0]
                    chosen[st] = pick
                    tx_count[pick] += 1
                    txlist[n_tx] = st
                    n_tx += 1

            measure = t >= warmup
            for j in range(n_tx):
                st = txlist[j]
                pick = chosen[st]
                if tx_count[pick] >= 2:
                    if stage[st] < m:
                        stage[st] += 1
                    if measure:
                        collisions += 1
                else:
                    stage[st] = 0
                    if measure:
                        successes += 1
                if measure:
                    attempts += 1
                    per_station[st] += 1
                    base = 0 if shared_pu else st * c
                    if occ[base + pick]:
                        pu_overlaps += 1
                counter[st] = _below(&g, (<int64_t>w) << stage[st])
            if measure:
                measured += 1
                n_occ = 0
                for ch in range(views * c):
                    n_occ += occ[ch]
                occupied_channel_slots += n_occ
                if n_tx == 0:
                    idle_slots += 1
                if not any_unblocked:
                    blocked_slots += 1

    result = {
        "attempts": attempts,
        "successes": successes,
        "collisions": collisions,
        "idle_slots": idle_slots,
        "busy_blocked_slots": blocked_slots,
        "measured_slots": measured,
        "per_station_attempts": [per_station[st] for st in range(n)],
        "pu_overlaps": pu_overlaps,
        "occupied_channel_slots": occupied_channel_slots,
    }
    free(occ); free(stage); free(counter); free(chosen); free(txlist)
    free(per_station); free(idle_list); free(tx_count)
    return result
