# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: SPSC rings, synthetic spin, Smith-Waterman DP, and
the native-thread benchmark farms (lock-free and mutex baseline).

Every long-running loop here runs with the GIL released so that Python
threads calling into it execute in parallel.
"""
from cpython.ref cimport PyObject, Py_INCREF, Py_DECREF
from libc.stdint cimport uint64_t, uintptr_t
from libc.stdlib cimport malloc, calloc, free

from streamfarm._sentinels import EMPTY

BACKEND = "compiled"


cdef extern from "ffcore.h" nogil:
    ctypedef struct ff_ring:
        pass
    ctypedef struct ff_mqueue:
        pass
    int FF_CACHE_LINE
    ff_ring *ff_ring_new(uint64_t capacity)
    void ff_ring_free(ff_ring *r)
    int ff_ring_push(ff_ring *r, uintptr_t v)
    int ff_ring_pop(ff_ring *r, uintptr_t *out)
    uint64_t ff_ring_len(ff_ring *r)
    void ff_backoff(uint64_t *count, uint64_t spin)
    uint64_t ff_spin(uint64_t iters)
    double ff_now()
    ff_mqueue *ff_mqueue_new(uint64_t capacity)
    void ff_mqueue_free(ff_mqueue *q)
    void ff_mqueue_put(ff_mqueue *q, uintptr_t v)
    uintptr_t ff_mqueue_get(ff_mqueue *q)


CACHE_LINE = FF_CACHE_LINE


cdef class RingBuffer:
    """Bounded wait-free SPSC queue of Python object handles.

    ``push`` returns False when full and ``pop`` returns ``EMPTY`` when
    there is nothing to read; neither blocks.
    """

    cdef ff_ring *_r
    cdef readonly Py_ssize_t capacity

    def __cinit__(self, Py_ssize_t capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self._r = ff_ring_new(capacity)
        if self._r == NULL:
            raise MemoryError("ring allocation failed")
        self.capacity = capacity

    def __dealloc__(self):
        cdef uintptr_t v
        if self._r != NULL:
            while ff_ring_pop(self._r, &v):
                Py_DECREF(<object><PyObject *>v)
            ff_ring_free(self._r)

    cpdef bint push(self, object item):
        cdef PyObject *p = <PyObject *>item
        Py_INCREF(item)
        if ff_ring_push(self._r, <uintptr_t>p):
            return True
        Py_DECREF(item)
        return False

    cpdef object pop(self):
        cdef uintptr_t v
        if not ff_ring_pop(self._r, &v):
            return EMPTY
        item = <object><PyObject *>v
        Py_DECREF(item)
        return item

    cpdef Py_ssize_t approx_len(self):
        return <Py_ssize_t>ff_ring_len(self._r)

    def __len__(self):
        return <Py_ssize_t>ff_ring_len(self._r)

    def __repr__(self):
        return f"RingBuffer(capacity={self.capacity}, len~{self.approx_len()})"


cdef class WordRing:
    """SPSC ring of non-zero machine words, usable without the GIL.

    ``produce_sequence``/``consume_sequence`` run a whole producer or
    consumer role in native code; call them from two different threads.
    """

    cdef ff_ring *_r
    cdef readonly Py_ssize_t capacity

    def __cinit__(self, Py_ssize_t capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self._r = ff_ring_new(capacity)
        if self._r == NULL:
            raise MemoryError("ring allocation failed")
        self.capacity = capacity

    def __dealloc__(self):
        ff_ring_free(self._r)

    def push(self, uint64_t word):
        if word == 0:
            raise ValueError("0 is the empty marker and cannot be pushed")
        return bool(ff_ring_push(self._r, <uintptr_t>word))

    def pop(self):
        """Return the oldest word, or 0 when empty."""
        cdef uintptr_t v = 0
        ff_ring_pop(self._r, &v)
        return v

    def approx_len(self):
        return ff_ring_len(self._r)

    def produce_sequence(self, uint64_t n, uint64_t spin=1024):
        """Push tokens 0..n-1 (stored as token+1). Returns Full retries."""
        cdef uint64_t k, bo = 0, fulls = 0
        with nogil:
            for k in range(n):
                while not ff_ring_push(self._r, <uintptr_t>(k + 1)):
                    fulls += 1
                    ff_backoff(&bo, spin)
                bo = 0
        return fulls

    def consume_sequence(self, uint64_t n, uint64_t spin=1024):
        """Pop n tokens, checking they arrive as 0..n-1.

        Returns ``(received, out_of_order, checksum, len_violations)``. The
        length check samples ``approx_len`` from the consumer role, where the
        true occupancy over the call window is bracketed by the value seen
        immediately before and after.
        """
        cdef uint64_t got = 0, bad = 0, checksum = 0, viol = 0, bo = 0
        cdef uint64_t lo, mid, hi
        cdef uintptr_t v
        with nogil:
            while got < n:
                if ff_ring_pop(self._r, &v):
                    if v - 1 != got:
                        bad += 1
                    checksum += v - 1
                    got += 1
                    bo = 0
                    if (got & 0xFFFF) == 0:
                        lo = ff_ring_len(self._r)
                        mid = ff_ring_len(self._r)
                        hi = ff_ring_len(self._r)
                        if mid < lo or mid > hi or hi > <uint64_t>self.capacity:
                            viol += 1
                else:
                    ff_backoff(&bo, spin)
        return got, bad, checksum, viol


def spin(uint64_t iters):
    """Busy loop of ``iters`` iterations with the GIL released."""
    with nogil:
        ff_spin(iters)


def spin_repeat(uint64_t iters, uint64_t reps):
    """Run ``spin(iters)`` ``reps`` times natively; returns elapsed seconds."""
    cdef uint64_t k
    cdef double t0, t1
    with nogil:
        t0 = ff_now()
        for k in range(reps):
            ff_spin(iters)
        t1 = ff_now()
    return t1 - t0


cdef enum:
    NEG_INF = -(1 << 28)


def sw_score_encoded(const unsigned char[::1] query,
                     const unsigned char[::1] subject,
                     const int[::1] matrix, Py_ssize_t stride,
                     int gap_open, int gap_extend):
    """Affine-gap local alignment score (Gotoh) over residue indices.

    ``matrix`` is the row-major substitution table with row length
    ``stride``. A gap of length k costs ``gap_open + (k - 1) * gap_extend``.
    """
    cdef Py_ssize_t m = query.shape[0], n = subject.shape[0]
    cdef Py_ssize_t i, j
    cdef int best = 0, h, e, f, diag, up
    cdef int *hrow
    cdef int *frow
    cdef const int *mrow
    if m == 0 or n == 0:
        return 0
    hrow = <int *>malloc((n + 1) * sizeof(int))
    frow = <int *>malloc((n + 1) * sizeof(int))
    if hrow == NULL or frow == NULL:
        free(hrow)
        free(frow)
        raise MemoryError()
    with nogil:
        for j in range(n + 1):
            hrow[j] = 0
            frow[j] = NEG_INF
        for i in range(m):
            mrow = &matrix[query[i] * stride]
            diag = 0
            e = NEG_INF
            h = 0
            for j in range(1, n + 1):
                # h holds H[i][j-1] (current row), hrow[j] holds H[i-1][j]
                e = max(e - gap_extend, h - gap_open)
                up = hrow[j]
                f = max(frow[j] - gap_extend, up - gap_open)
                frow[j] = f
                h = diag + mrow[subject[j - 1]]
                if e > h:
                    h = e
                if f > h:
                    h = f
                if h < 0:
                    h = 0
                diag = up
                hrow[j] = h
                if h > best:
                    best = h
    free(hrow)
    free(frow)
    return best


# ---------------------------------------------------------------------------
# native benchmark farm

cdef enum:
    NWORDS = 10
    EOS_WORD = 1

ctypedef struct Task:
    uint64_t words[NWORDS]
    uint64_t seq


cdef inline void task_init(Task *t, uint64_t seq) noexcept nogil:
    cdef int k
    t.seq = seq
    for k in range(NWORDS):
        t.words[k] = seq + k


cdef inline void task_touch(Task *t) noexcept nogil:
    cdef int k
    for k in range(NWORDS):
        t.words[k] = t.words[k] + 1


cdef inline int task_ok(Task *t) noexcept nogil:
    cdef int k
    for k in range(NWORDS):
        if t.words[k] != t.seq + k + 1:
            return 0
    return 1


cdef class _TaskPool:
    # acquirer-owned free stack plus one SPSC return ring per releaser (one here)
    cdef Task *arena
    cdef Task **stack
    cdef Py_ssize_t top, total
    cdef ff_ring *returns

    def __cinit__(self, Py_ssize_t total):
        self.arena = <Task *>calloc(total, sizeof(Task))
        self.stack = <Task **>malloc(total * sizeof(Task *))
        self.returns = ff_ring_new(total)
        if self.arena == NULL or self.stack == NULL or self.returns == NULL:
            raise MemoryError()
        self.total = total
        self.reset()

    cdef void reset(self):
        cdef Py_ssize_t k
        cdef uintptr_t v
        while ff_ring_pop(self.returns, &v):
            pass
        for k in range(self.total):
            self.stack[k] = &self.arena[k]
        self.top = self.total

    def __dealloc__(self):
        free(self.arena)
        free(self.stack)
        ff_ring_free(self.returns)

    cdef Task *acquire(self) noexcept nogil:
        cdef uintptr_t v
        if self.top == 0:
            while ff_ring_pop(self.returns, &v):
                self.stack[self.top] = <Task *>v
                self.top += 1
            if self.top == 0:
                return NULL
        self.top -= 1
        return self.stack[self.top]

    cdef int release(self, Task *t) noexcept nogil:
        return ff_ring_push(self.returns, <uintptr_t>t)


cdef class NativeFarm:
    """Emitter, ``n_workers`` workers and a collector on native SPSC rings.

    Each role method runs with the GIL released; launch ``emitter``,
    ``worker(i)`` for every i and ``collector`` on separate threads.
    With ``mutex=True`` the same roles communicate through two shared
    mutex/condition-variable queues instead.
    """

    cdef readonly int n_workers
    cdef readonly uint64_t n_tasks, spin_iters, backoff_spin
    cdef readonly bint use_pool, mutex, ondemand
    cdef ff_ring **to_workers
    cdef ff_ring **from_workers
    cdef ff_mqueue *mq_in
    cdef ff_mqueue *mq_out
    cdef _TaskPool pool
    cdef readonly uint64_t collected, corrupted
    cdef uint64_t *processed

    def __cinit__(self, int n_workers, uint64_t n_tasks, uint64_t spin_iters,
                  Py_ssize_t capacity=512, bint use_pool=True, bint mutex=False,
                  bint ondemand=False, uint64_t backoff_spin=1024):
        cdef int w
        if n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.n_workers = n_workers
        self.n_tasks = n_tasks
        self.spin_iters = spin_iters
        self.use_pool = use_pool
        self.mutex = mutex
        self.ondemand = ondemand
        self.backoff_spin = backoff_spin
        self.processed = <uint64_t *>calloc(n_workers, sizeof(uint64_t))
        if mutex:
            self.mq_in = ff_mqueue_new(capacity)
            self.mq_out = ff_mqueue_new(capacity)
        else:
            self.to_workers = <ff_ring **>calloc(n_workers, sizeof(ff_ring *))
            self.from_workers = <ff_ring **>calloc(n_workers, sizeof(ff_ring *))
            for w in range(n_workers):
                self.to_workers[w] = ff_ring_new(capacity)
                self.from_workers[w] = ff_ring_new(capacity)
        if use_pool:
            # every task in flight fits: queues plus one held per thread
            self.pool = _TaskPool(2 * capacity * (n_workers + 1) + n_workers + 4)

    def __dealloc__(self):
        cdef int w
        if self.to_workers != NULL:
            for w in range(self.n_workers):
                ff_ring_free(self.to_workers[w])
                ff_ring_free(self.from_workers[w])
            free(self.to_workers)
            free(self.from_workers)
        ff_mqueue_free(self.mq_in)
        ff_mqueue_free(self.mq_out)
        free(self.processed)

    cdef Task *_alloc(self) noexcept nogil:
        cdef Task *t
        cdef uint64_t bo = 0
        if not self.use_pool:
            return <Task *>malloc(sizeof(Task))
        t = self.pool.acquire()
        while t == NULL:
            ff_backoff(&bo, self.backoff_spin)
            t = self.pool.acquire()
        return t

    cdef void _release(self, Task *t) noexcept nogil:
        cdef uint64_t bo = 0
        if not self.use_pool:
            free(t)
            return
        while not self.pool.release(t):
            ff_backoff(&bo, self.backoff_spin)

    cdef void _push(self, ff_ring *r, uintptr_t v) noexcept nogil:
        cdef uint64_t bo = 0
        while not ff_ring_push(r, v):
            ff_backoff(&bo, self.backoff_spin)

    def emitter(self):
        cdef uint64_t seq, bo
        cdef int w, k, best
        cdef uint64_t occ, best_occ
        cdef Task *t
        with nogil:
            for seq in range(self.n_tasks):
                t = self._alloc()
                task_init(t, seq)
                if self.mutex:
                    ff_mqueue_put(self.mq_in, <uintptr_t>t)
                    continue
                if self.ondemand:
                    bo = 0
                    while True:
                        best = -1
                        best_occ = 0
                        for k in range(self.n_workers):
                            occ = ff_ring_len(self.to_workers[k])
                            if best < 0 or occ < best_occ:
                                best = k
                                best_occ = occ
                        if ff_ring_push(self.to_workers[best], <uintptr_t>t):
                            break
                        ff_backoff(&bo, self.backoff_spin)
                else:
                    self._push(self.to_workers[seq % self.n_workers], <uintptr_t>t)
            for w in range(self.n_workers):
                if self.mutex:
                    ff_mqueue_put(self.mq_in, EOS_WORD)
                else:
                    self._push(self.to_workers[w], EOS_WORD)

    def worker(self, int w):
        cdef uintptr_t v
        cdef uint64_t bo = 0, done = 0
        cdef ff_ring *src
        cdef ff_ring *dst
        if w < 0 or w >= self.n_workers:
            raise IndexError(w)
        with nogil:
            if not self.mutex:
                src = self.to_workers[w]
                dst = self.from_workers[w]
            while True:
                if self.mutex:
                    v = ff_mqueue_get(self.mq_in)
                else:
                    while not ff_ring_pop(src, &v):
                        ff_backoff(&bo, self.backoff_spin)
                    bo = 0
                if v == EOS_WORD:
                    break
                task_touch(<Task *>v)
                ff_spin(self.spin_iters)
                done += 1
                if self.mutex:
                    ff_mqueue_put(self.mq_out, v)
                else:
                    self._push(dst, v)
            if self.mutex:
                ff_mqueue_put(self.mq_out, EOS_WORD)
            else:
                self._push(dst, EOS_WORD)
            self.processed[w] = done

    def collector(self):
        cdef uintptr_t v
        cdef uint64_t bo = 0, got = 0, bad = 0
        cdef int eos = 0, start = 0, k, w, found
        cdef char *closed = <char *>calloc(self.n_workers, 1)
        with nogil:
            while eos < self.n_workers:
                if self.mutex:
                    v = ff_mqueue_get(self.mq_out)
                else:
                    found = 0
                    for k in range(self.n_workers):
                        w = (start + k) % self.n_workers
                        if closed[w]:
                            continue
                        if ff_ring_pop(self.from_workers[w], &v):
                            found = 1
                            start = (w + 1) % self.n_workers
                            break
                    if not found:
                        ff_backoff(&bo, self.backoff_spin)
                        continue
                    bo = 0
                    if v == EOS_WORD:
                        closed[w] = 1
                if v == EOS_WORD:
                    eos += 1
                    continue
                if not task_ok(<Task *>v):
                    bad += 1
                got += 1
                self._release(<Task *>v)
        free(closed)
        self.collected = got
        self.corrupted = bad

    def per_worker(self):
        return [self.processed[w] for w in range(self.n_workers)]


def run_sequential(uint64_t n_tasks, uint64_t spin_iters, bint use_pool=True):
    """Single-threaded reference loop. Returns ``(seconds, collected, corrupted)``."""
    cdef uint64_t seq, got = 0, bad = 0
    cdef Task *t
    cdef _TaskPool pool = _TaskPool(4) if use_pool else None
    cdef double t0, t1
    with nogil:
        t0 = ff_now()
        for seq in range(n_tasks):
            if use_pool:
                t = pool.acquire()
            else:
                t = <Task *>malloc(sizeof(Task))
            task_init(t, seq)
            task_touch(t)
            ff_spin(spin_iters)
            if not task_ok(t):
                bad += 1
            got += 1
            if use_pool:
                pool.release(t)
            else:
                free(t)
        t1 = ff_now()
    return t1 - t0, got, bad
