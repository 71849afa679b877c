/* Low-level channel primitives used by the compiled core.
 *
 * ff_ring: bounded SPSC ring of non-zero machine words. A zero slot means
 * "empty", so the hot path never reads the peer's index (FastForward style).
 * Index publication uses plain acquire/release loads and stores; there is no
 * read-modify-write instruction anywhere in this file outside ff_mqueue,
 * which is the mutex baseline.
 */
#ifndef STREAMFARM_FFCORE_H
#define STREAMFARM_FFCORE_H

#include <stdint.h>
#include <stdlib.h>
#include <string.h>
#include <sched.h>
#include <pthread.h>
#include <time.h>

#ifndef FF_CACHE_LINE
#define FF_CACHE_LINE 64
#endif

#define FF_LOAD_ACQ(p) __atomic_load_n((p), __ATOMIC_ACQUIRE)
#define FF_STORE_REL(p, v) __atomic_store_n((p), (v), __ATOMIC_RELEASE)

static inline void ff_relax(void) {
#if defined(__x86_64__) || defined(__i386__)
    __asm__ __volatile__("pause" ::: "memory");
#else
    __asm__ __volatile__("" ::: "memory");
#endif
}

typedef struct {
    /* producer-owned line */
    uint64_t pwrite;
    uint64_t tail_count;
    char pad0[FF_CACHE_LINE - 2 * sizeof(uint64_t)];
    /* consumer-owned line */
    uint64_t pread;
    uint64_t head_count;
    char pad1[FF_CACHE_LINE - 2 * sizeof(uint64_t)];
    /* read-only after init */
    uint64_t capacity;
    uintptr_t *slots;
    char pad2[FF_CACHE_LINE - sizeof(uint64_t) - sizeof(uintptr_t *)];
} ff_ring;

static inline ff_ring *ff_ring_new(uint64_t capacity) {
    void *mem = NULL;
    ff_ring *r;
    if (capacity == 0)
        return NULL;
    if (posix_memalign(&mem, FF_CACHE_LINE, sizeof(ff_ring)) != 0)
        return NULL;
    r = (ff_ring *)mem;
    memset(r, 0, sizeof(ff_ring));
    if (posix_memalign(&mem, FF_CACHE_LINE, capacity * sizeof(uintptr_t)) != 0) {
        free(r);
        return NULL;
    }
    r->slots = (uintptr_t *)mem;
    memset(r->slots, 0, capacity * sizeof(uintptr_t));
    r->capacity = capacity;
    return r;
}

static inline void ff_ring_free(ff_ring *r) {
    if (r) {
        free(r->slots);
        free(r);
    }
}

/* Producer role only. Returns 1 on success, 0 when full. */
static inline int ff_ring_push(ff_ring *r, uintptr_t v) {
    uint64_t i = r->pwrite;
    if (FF_LOAD_ACQ(&r->slots[i]) != 0)
        return 0;
    FF_STORE_REL(&r->slots[i], v);
    r->pwrite = (i + 1 == r->capacity) ? 0 : i + 1;
    FF_STORE_REL(&r->tail_count, r->tail_count + 1);
    return 1;
}

/* Consumer role only. Returns 1 and stores the item on success, 0 when empty. */
static inline int ff_ring_pop(ff_ring *r, uintptr_t *out) {
    uint64_t i = r->pread;
    uintptr_t v = FF_LOAD_ACQ(&r->slots[i]);
    if (v == 0)
        return 0;
    FF_STORE_REL(&r->slots[i], (uintptr_t)0);
    r->pread = (i + 1 == r->capacity) ? 0 : i + 1;
    FF_STORE_REL(&r->head_count, r->head_count + 1);
    *out = v;
    return 1;
}

static inline uint64_t ff_ring_len(ff_ring *r) {
    uint64_t h = FF_LOAD_ACQ(&r->head_count);
    uint64_t t = FF_LOAD_ACQ(&r->tail_count);
    if (t <= h)
        return 0;
    return (t - h > r->capacity) ? r->capacity : t - h;
}

/* Spin-then-yield. `count` is caller-local state, reset on progress. */
static inline void ff_backoff(uint64_t *count, uint64_t spin) {
    if (*count < spin) {
        ff_relax();
        (*count)++;
    } else {
        sched_yield();
        *count = 0;
    }
}

/* Synthetic compute: a serial multiply-add chain held in registers, so the
 * cost per iteration does not depend on where the loop is inlined. The sink
 * keeps the compiler from dropping it. */
static volatile uint64_t ff_spin_sink;

static inline uint64_t ff_spin(uint64_t iters) {
    uint64_t x = iters | 1u;
    uint64_t k;
    for (k = 0; k < iters; k++)
        x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    ff_spin_sink = x;
    return x;
}

static inline double ff_now(void) {
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (double)ts.tv_sec + 1e-9 * (double)ts.tv_nsec;
}

/* Bounded blocking MPMC queue protected by a mutex and two condition
 * variables; the locking baseline for the benchmark. */
typedef struct {
    pthread_mutex_t lock;
    pthread_cond_t not_empty;
    pthread_cond_t not_full;
    uintptr_t *buf;
    uint64_t capacity;
    uint64_t head;
    uint64_t count;
} ff_mqueue;

static inline ff_mqueue *ff_mqueue_new(uint64_t capacity) {
    ff_mqueue *q;
    if (capacity == 0)
        return NULL;
    q = (ff_mqueue *)calloc(1, sizeof(ff_mqueue));
    if (!q)
        return NULL;
    q->buf = (uintptr_t *)calloc(capacity, sizeof(uintptr_t));
    if (!q->buf) {
        free(q);
        return NULL;
    }
    q->capacity = capacity;
    pthread_mutex_init(&q->lock, NULL);
    pthread_cond_init(&q->not_empty, NULL);
    pthread_cond_init(&q->not_full, NULL);
    return q;
}

static inline void ff_mqueue_free(ff_mqueue *q) {
    if (q) {
        pthread_mutex_destroy(&q->lock);
        pthread_cond_destroy(&q->not_empty);
        pthread_cond_destroy(&q->not_full);
        free(q->buf);
        free(q);
    }
}

static inline void ff_mqueue_put(ff_mqueue *q, uintptr_t v) {
    pthread_mutex_lock(&q->lock);
    while (q->count == q->capacity)
        pthread_cond_wait(&q->not_full, &q->lock);
    q->buf[(q->head + q->count) % q->capacity] = v;
    q->count++;
    pthread_cond_signal(&q->not_empty);
    pthread_mutex_unlock(&q->lock);
}

static inline uintptr_t ff_mqueue_get(ff_mqueue *q) {
    uintptr_t v;
    pthread_mutex_lock(&q->lock);
    while (q->count == 0)
        pthread_cond_wait(&q->not_empty, &q->lock);
    v = q->buf[q->head];
    q->head = (q->head + 1) % q->capacity;
    q->count--;
    pthread_cond_signal(&q->not_full);
    pthread_mutex_unlock(&q->lock);
    return v;
}

#endif
