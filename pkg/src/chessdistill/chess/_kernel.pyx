# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled move-generation kernel.

Same contract as ``_kernel_py``; the perft recursion runs entirely on C
arrays with make/unmake and bulk counting at the last ply.
"""

BACKEND = "cython"

cdef enum:
    MAX_MOVES = 256

cdef int KNIGHT_N[64]
cdef int KNIGHT_T[64][8]
cdef int KING_N[64]
cdef int KING_T[64][8]
cdef int RAY_N[64][8]
cdef int RAY_T[64][8][7]
cdef int CASTLE_MASK[64]

cdef struct Undo:
    int frm
    int to
    int pc
    int captured
    int cap_sq
    int rook_from
    int rook_to


cdef void _init_tables():
    cdef int sq, f, r, i, n, d, cf, cr, df, dr
    cdef int kn_df[8]
    cdef int kn_dr[8]
    cdef int dir_df[8]
    cdef int dir_dr[8]
    kn_df[:] = [1, 2, 2, 1, -1, -2, -2, -1]
    kn_dr[:] = [2, 1, -1, -2, -2, -1, 1, 2]
    dir_df[:] = [1, -1, 0, 0, 1, 1, -1, -1]
    dir_dr[:] = [0, 0, 1, -1, 1, -1, 1, -1]
    for sq in range(64):
        f = sq % 8
        r = sq // 8
        n = 0
        for i in range(8):
            cf = f + kn_df[i]
            cr = r + kn_dr[i]
            if 0 <= cf < 8 and 0 <= cr < 8:
                KNIGHT_T[sq][n] = cr * 8 + cf
                n += 1
        KNIGHT_N[sq] = n
        n = 0
        for df in range(-1, 2):
            for dr in range(-1, 2):
                if df == 0 and dr == 0:
                    continue
                cf = f + df
                cr = r + dr
                if 0 <= cf < 8 and 0 <= cr < 8:
                    KING_T[sq][n] = cr * 8 + cf
                    n += 1
        KING_N[sq] = n
        for d in range(8):
            n = 0
            cf = f + dir_df[d]
            cr = r + dir_dr[d]
            while 0 <= cf < 8 and 0 <= cr < 8:
                RAY_T[sq][d][n] = cr * 8 + cf
                n += 1
                cf += dir_df[d]
                cr += dir_dr[d]
            RAY_N[sq][d] = n
        CASTLE_MASK[sq] = 15
    CASTLE_MASK[0] = 15 & ~2
    CASTLE_MASK[4] = 15 & ~3
    CASTLE_MASK[7] = 15 & ~1
    CASTLE_MASK[56] = 15 & ~8
    CASTLE_MASK[60] = 15 & ~12
    CASTLE_MASK[63] = 15 & ~4


_init_tables()


cdef inline bint _attacked(int* board, int sq, bint by_white) nogil:
    cdef int side = 0 if by_white else 8
    cdef int f = sq % 8
    cdef int i, d, t, pc
    cdef int rook, bishop, queen
    if by_white:
        if sq >= 8:
            if f > 0 and board[sq - 9] == 1:
                return True
            if f < 7 and board[sq - 7] == 1:
                return True
    else:
        if sq < 56:
            if f > 0 and board[sq + 7] == 9:
                return True
            if f < 7 and board[sq + 9] == 9:
                return True
    for i in range(KNIGHT_N[sq]):
        if board[KNIGHT_T[sq][i]] == (2 | side):
            return True
    for i in range(KING_N[sq]):
        if board[KING_T[sq][i]] == (6 | side):
            return True
    rook = 4 | side
    bishop = 3 | side
    queen = 5 | side
    for d in range(4):
        for i in range(RAY_N[sq][d]):
            pc = board[RAY_T[sq][d][i]]
            if pc:
                if pc == rook or pc == queen:
                    return True
                break
    for d in range(4, 8):
        for i in range(RAY_N[sq][d]):
            pc = board[RAY_T[sq][d][i]]
            if pc:
                if pc == bishop or pc == queen:
                    return True
                break
    return False


cdef inline int _add_pawn(int* moves, int n, int frm, int to, bint promote) nogil:
    if promote:
        moves[n] = frm | (to << 6) | (5 << 12)
        moves[n + 1] = frm | (to << 6) | (4 << 12)
        moves[n + 2] = frm | (to << 6) | (3 << 12)
        moves[n + 3] = frm | (to << 6) | (2 << 12)
        return n + 4
    moves[n] = frm | (to << 6)
    return n + 1


cdef int _pseudo(int* board, bint white, int castling, int ep, int* moves) nogil:
    cdef int n = 0
    cdef int side = 0 if white else 8
    cdef int sq, pc, kind, f, r, to, target, i, d, lo, hi, step, last_rank, start_rank, df
    for sq in range(64):
        pc = board[sq]
        if pc == 0 or (pc & 8) != side:
            continue
        kind = pc & 7
        if kind == 1:
            f = sq % 8
            r = sq // 8
            if white:
                step = 8
                last_rank = 7
                start_rank = 1
            else:
                step = -8
                last_rank = 0
                start_rank = 6
            to = sq + step
            if board[to] == 0:
                n = _add_pawn(moves, n, sq, to, to // 8 == last_rank)
                if r == start_rank and board[to + step] == 0:
                    moves[n] = sq | ((to + step) << 6)
                    n += 1
            for df in range(-1, 2, 2):
                if f + df < 0 or f + df > 7:
                    continue
                to = sq + step + df
                target = board[to]
                if target != 0 and (target & 8) != side:
                    n = _add_pawn(moves, n, sq, to, to // 8 == last_rank)
                elif to == ep:
                    moves[n] = sq | (to << 6)
                    n += 1
        elif kind == 2:
            for i in range(KNIGHT_N[sq]):
                to = KNIGHT_T[sq][i]
                target = board[to]
                if target == 0 or (target & 8) != side:
                    moves[n] = sq | (to << 6)
                    n += 1
        elif kind == 6:
            for i in range(KING_N[sq]):
                to = KING_T[sq][i]
                target = board[to]
                if target == 0 or (target & 8) != side:
                    moves[n] = sq | (to << 6)
                    n += 1
        else:
            lo = 4 if kind == 3 else 0
            hi = 4 if kind == 4 else 8
            for d in range(lo, hi):
                for i in range(RAY_N[sq][d]):
                    to = RAY_T[sq][d][i]
                    target = board[to]
                    if target != 0:
                        if (target & 8) != side:
                            moves[n] = sq | (to << 6)
                            n += 1
                        break
                    moves[n] = sq | (to << 6)
                    n += 1
    if white:
        if (castling & 1) and board[4] == 6 and board[7] == 4 and board[5] == 0 and board[6] == 0:
            if not _attacked(board, 4, False) and not _attacked(board, 5, False) and not _attacked(board, 6, False):
                moves[n] = 4 | (6 << 6)
                n += 1
        if (castling & 2) and board[4] == 6 and board[0] == 4 and board[1] == 0 and board[2] == 0 and board[3] == 0:
            if not _attacked(board, 4, False) and not _attacked(board, 3, False) and not _attacked(board, 2, False):
                moves[n] = 4 | (2 << 6)
                n += 1
    else:
        if (castling & 4) and board[60] == 14 and board[63] == 12 and board[61] == 0 and board[62] == 0:
            if not _attacked(board, 60, True) and not _attacked(board, 61, True) and not _attacked(board, 62, True):
                moves[n] = 60 | (62 << 6)
                n += 1
        if (castling & 8) and board[60] == 14 and board[56] == 12 and board[57] == 0 and board[58] == 0 and board[59] == 0:
            if not _attacked(board, 60, True) and not _attacked(board, 59, True) and not _attacked(board, 58, True):
                moves[n] = 60 | (58 << 6)
                n += 1
    return n


cdef inline void _make(int* board, bint white, int* castling, int* ep, int move, Undo* u) nogil:
    cdef int frm = move & 63
    cdef int to = (move >> 6) & 63
    cdef int promo = move >> 12
    cdef int pc = board[frm]
    cdef int kind = pc & 7
    u.frm = frm
    u.to = to
    u.pc = pc
    u.captured = board[to]
    u.cap_sq = to
    u.rook_from = -1
    u.rook_to = -1
    board[frm] = 0
    if kind == 1:
        if to == ep[0]:
            u.cap_sq = to - 8 if white else to + 8
            u.captured = board[u.cap_sq]
            board[u.cap_sq] = 0
            ep[0] = -1
        elif to - frm == 16 or frm - to == 16:
            ep[0] = (frm + to) >> 1
        else:
            ep[0] = -1
        board[to] = (promo | (pc & 8)) if promo else pc
    else:
        ep[0] = -1
        board[to] = pc
        if kind == 6 and (to - frm == 2 or frm - to == 2):
            if to > frm:
                u.rook_from = frm + 3
                u.rook_to = frm + 1
            else:
                u.rook_from = frm - 4
                u.rook_to = frm - 1
            board[u.rook_to] = board[u.rook_from]
            board[u.rook_from] = 0
    castling[0] = castling[0] & CASTLE_MASK[frm] & CASTLE_MASK[to]


cdef inline void _unmake(int* board, Undo* u) nogil:
    board[u.frm] = u.pc
    board[u.to] = 0
    board[u.cap_sq] = u.captured
    if u.rook_from >= 0:
        board[u.rook_from] = board[u.rook_to]
        board[u.rook_to] = 0


cdef inline int _king_sq(int* board, bint white) nogil:
    cdef int code = 6 if white else 14
    cdef int sq
    for sq in range(64):
        if board[sq] == code:
            return sq
    return -1


cdef int _legal(int* board, bint white, int castling, int ep, int* out) nogil:
    cdef int pseudo[MAX_MOVES]
    cdef int np = _pseudo(board, white, castling, ep, pseudo)
    cdef int king = _king_sq(board, white)
    cdef int i, m, ksq, c2, ep2
    cdef int n = 0
    cdef Undo u
    for i in range(np):
        m = pseudo[i]
        c2 = castling
        ep2 = ep
        _make(board, white, &c2, &ep2, m, &u)
        ksq = ((m >> 6) & 63) if (m & 63) == king else king
        if not _attacked(board, ksq, not white):
            out[n] = m
            n += 1
        _unmake(board, &u)
    return n


cdef long long _perft(int* board, bint white, int castling, int ep, int depth) nogil:
    cdef int moves[MAX_MOVES]
    cdef int n = _legal(board, white, castling, ep, moves)
    cdef long long total = 0
    cdef int i, c2, ep2
    cdef Undo u
    if depth == 1:
        return n
    for i in range(n):
        c2 = castling
        ep2 = ep
        _make(board, white, &c2, &ep2, moves[i], &u)
        total += _perft(board, not white, c2, ep2, depth - 1)
        _unmake(board, &u)
    return total


cdef void _load(object board, int* out) except *:
    cdef int i
    if len(board) != 64:
        raise ValueError("board must have 64 cells")
    for i in range(64):
        out[i] = board[i]


def attacked(board, int sq, bint by_white):
    """Whether ``sq`` is attacked by the given side."""
    cdef int b[64]
    _load(board, b)
    return _attacked(b, sq, by_white)


def in_check(board, bint white):
    """Whether the king of side ``white`` is attacked."""
    cdef int b[64]
    _load(board, b)
    return _attacked(b, _king_sq(b, white), not white)


def legal_moves(board, bint white, int castling, int ep):
    """Legal moves for the side to move, in generation order."""
    cdef int b[64]
    cdef int out[MAX_MOVES]
    cdef int n, i
    _load(board, b)
    n = _legal(b, white, castling, ep, out)
    return [out[i] for i in range(n)]


def perft(board, bint white, int castling, int ep, int depth):
    """Leaf count of the legal-move tree at exactly ``depth`` plies."""
    cdef int b[64]
    cdef long long total
    if depth <= 0:
        return 1
    _load(board, b)
    with nogil:
        total = _perft(b, white, castling, ep, depth)
    return total
