/* Support declarations for drivers written by `leakbound emit-driver`.
 *
 * The analysed dialect's fixed-width type names, nondeterministic input
 * stubs, assume/assert, and a copy_to_user model that fills the trailing
 * alignment padding of the copied object with nondeterministic bytes.
 * Bounded model checkers usually treat bodiless nondet_* functions as
 * returning arbitrary values.  Define LB_ARCH as 32 or 64 before including
 * this header to select the padding alignment (default 32).
 *
 * Width caveat: the analysed dialect gives size_t 32 bits and long the
 * target word size; this header uses the host compiler's own types.
 */
#ifndef LEAKBOUND_STUBS_H
#define LEAKBOUND_STUBS_H

#include <assert.h>
#include <stddef.h>
#include <stdint.h>
#include <string.h>

#ifndef LB_ARCH
#define LB_ARCH 32
#endif
#if LB_ARCH == 64
#define LB_ALIGN 8
typedef uint64_t lb_word;
#else
#define LB_ALIGN 4
typedef uint32_t lb_word;
#endif

typedef uint8_t u8;
typedef uint16_t u16;
typedef uint32_t u32;
typedef uint64_t u64;
typedef int8_t s8;
typedef int16_t s16;
typedef int32_t s32;
typedef int64_t s64;
typedef unsigned char u_char;
typedef long long loff_t;
typedef _Bool bool;

/* Nondeterministic values. */
u8 nondet_u8(void);
u16 nondet_u16(void);
u32 nondet_u32(void);
u64 nondet_u64(void);
s8 nondet_s8(void);
s16 nondet_s16(void);
s32 nondet_s32(void);
s64 nondet_s64(void);
bool nondet_bool(void);

/* Fill n bytes at p with nondeterministic values. */
static void nondet_fill(void *p, size_t n)
{
    unsigned char *b = (unsigned char *)p;
    size_t i;
    for (i = 0; i < n; i++)
        b[i] = nondet_u8();
}

/* Restrict attention to executions where cond holds. */
void assume(int cond);

/* Copy n bytes, then fill the trailing padding up to the next multiple of
 * LB_ALIGN with nondeterministic bytes; always succeeds. */
static int copy_to_user(void *dst, const void *src, size_t n)
{
    size_t pad = LB_ALIGN - n % LB_ALIGN;
    memcpy(dst, src, n);
    if (pad != LB_ALIGN)
        nondet_fill((unsigned char *)dst + n, pad);
    return 0;
}

#endif /* LEAKBOUND_STUBS_H */
