"""Pure-Python slot kernel. Mirrors ``_simcore.pyx`` draw for draw."""

_MASK = (1 << 64) - 1
_TWO_M53 = 1.0 / (1 << 53)


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


class _Xoshiro256:
    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed):
        x = seed & _MASK
        x, self.s0 = _splitmix64(x)
        x, self.s1 = _splitmix64(x)
        x, self.s2 = _splitmix64(x)
        x, self.s3 = _splitmix64(x)

    def next(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        r = (s1 * 5) & _MASK
        r = ((r << 7) | (r >> 57)) & _MASK
        result = (r * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self):
        return (self.next() >> 11) * _TWO_M53

    def below(self, n):
        return int(self.uniform() * n)


def raw_stream(seed, count):
    """First ``count`` raw 64-bit outputs; used to pin both backends to one stream."""
    rng = _Xoshiro256(seed)
    return [rng.next() for _ in range(count)]


def run_slots(n, m, w, c, alpha, p_d, p_f, slots, warmup, seed, shared_pu=True):
    rng = _Xoshiro256(seed)
    uniform = rng.uniform
    below = rng.below

    views = 1 if shared_pu else n
    # occ[v * c + ch]: PU occupancy of channel ch as seen by view v
    occ = [uniform() < alpha for _ in range(views * c)]
    stage = [0] * n
    counter = [below(w) for _ in range(n)]
    chosen = [0] * n
    per_station = [0] * n
    idle_list = [0] * c

    attempts = successes = collisions = 0
    idle_slots = blocked_slots = measured = 0
    pu_overlaps = occupied_channel_slots = 0

    for t in range(slots):
        for v in range(views):
            ch = below(c) if c > 1 else 0
            occ[v * c + ch] = uniform() < alpha
        tx_count = [0] * c
        txlist = []
        any_unblocked = False
        for st in range(n):
            base = 0 if shared_pu else st * c
            n_idle = 0
            for ch in range(c):
                if not uniform() < (p_d if occ[base + ch] else p_f):
                    idle_list[n_idle] = ch
                    n_idle += 1
            if n_idle == 0:
                continue
            any_unblocked = True
            if counter[st] > 0:
                counter[st] -= 1
            else:
                pick = idle_list[below(n_idle)] if n_idle > 1 else idle_list[0]
                chosen[st] = pick
                tx_count[pick] += 1
                txlist.append(st)

        measure = t >= warmup
        for st in txlist:
            pick = chosen[st]
            if tx_count[pick] >= 2:
                stage[st] = min(stage[st] + 1, m)
                if measure:
                    collisions += 1
            else:
                stage[st] = 0
                if measure:
                    successes += 1
            if measure:
                attempts += 1
                per_station[st] += 1
                if occ[(0 if shared_pu else st * c) + pick]:
                    pu_overlaps += 1
            counter[st] = below(w << stage[st])
        if measure:
            measured += 1
            occupied_channel_slots += sum(occ)
            if not txlist:
                idle_slots += 1
            if not any_unblocked:
                blocked_slots += 1

    return {
        "attempts": attempts,
        "successes": successes,
        "collisions": collisions,
        "idle_slots": idle_slots,
        "busy_blocked_slots": blocked_slots,
        "measured_slots": measured,
        "per_station_attempts": per_station,
        "pu_overlaps": pu_overlaps,
        "occupied_channel_slots": occupied_channel_slots,
    }
