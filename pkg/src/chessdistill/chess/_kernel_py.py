"""Pure-Python move-generation kernel.

Mirror of ``_kernel.pyx``; both expose the same four functions over a raw
state ``(board, white, castling, ep)`` where ``board`` is a mutable list of 64
piece codes, ``white`` is the side to move, ``castling`` the K/Q/k/q bitmask
and ``ep`` the en-passant target index or -1. Moves are encoded as
``from | to << 6 | promo << 12``.
"""

BACKEND = "python"

_P, _N, _B, _R, _Q, _K = 1, 2, 3, 4, 5, 6
_BLACK = 8


def _build_tables():
    knight, king = [], []
    rays = []
    orth = ((1, 0), (-1, 0), (0, 1), (0, -1))
    diag = ((1, 1), (1, -1), (-1, 1), (-1, -1))
    for sq in range(64):
        f, r = sq % 8, sq // 8
        knight.append([
            (r + dr) * 8 + f + df
            for df, dr in ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))
            if 0 <= f + df < 8 and 0 <= r + dr < 8
        ])
        king.append([
            (r + dr) * 8 + f + df
            for df in (-1, 0, 1) for dr in (-1, 0, 1)
            if (df or dr) and 0 <= f + df < 8 and 0 <= r + dr < 8
        ])
        sq_rays = []
        for df, dr in orth + diag:
            ray = []
            cf, cr = f + df, r + dr
            while 0 <= cf < 8 and 0 <= cr < 8:
                ray.append(cr * 8 + cf)
                cf += df
                cr += dr
            sq_rays.append(ray)
        rays.append(sq_rays)
    return knight, king, rays


KNIGHT_TARGETS, KING_TARGETS, RAYS = _build_tables()

# castling &= CASTLE_MASK[from] & CASTLE_MASK[to]
CASTLE_MASK = [15] * 64
CASTLE_MASK[0] = 15 & ~2
CASTLE_MASK[4] = 15 & ~3
CASTLE_MASK[7] = 15 & ~1
CASTLE_MASK[56] = 15 & ~8
CASTLE_MASK[60] = 15 & ~12
CASTLE_MASK[63] = 15 & ~4


def attacked(board, sq, by_white):
    """Whether ``sq`` is attacked by the given side."""
    side = 0 if by_white else _BLACK
    f = sq % 8
    # pawns attack diagonally toward the opponent
    if by_white:
        if sq >= 8:
            if f > 0 and board[sq - 9] == _P:
                return True
            if f < 7 and board[sq - 7] == _P:
                return True
    else:
        if sq < 56:
            if f > 0 and board[sq + 7] == _P | _BLACK:
                return True
            if f < 7 and board[sq + 9] == _P | _BLACK:
                return True
    kn = _N | side
    for t in KNIGHT_TARGETS[sq]:
        if board[t] == kn:
            return True
    kg = _K | side
    for t in KING_TARGETS[sq]:
        if board[t] == kg:
            return True
    rook, bishop, queen = _R | side, _B | side, _Q | side
    sq_rays = RAYS[sq]
    for d in range(4):
        for t in sq_rays[d]:
            pc = board[t]
            if pc:
                if pc == rook or pc == queen:
                    return True
                break
    for d in range(4, 8):
        for t in sq_rays[d]:
            pc = board[t]
            if pc:
                if pc == bishop or pc == queen:
                    return True
                break
    return False


def _pseudo_moves(board, white, castling, ep):
    moves = []
    add = moves.append
    side = 0 if white else _BLACK
    for sq in range(64):
        pc = board[sq]
        if not pc or (pc & _BLACK) != side:
            continue
        kind = pc & 7
        if kind == _P:
            f, r = sq % 8, sq // 8
            step = 8 if white else -8
            last_rank = 7 if white else 0
            start_rank = 1 if white else 6
            to = sq + step
            if board[to] == 0:
                if to // 8 == last_rank:
                    for promo in (_Q, _R, _B, _N):
                        add(sq | to << 6 | promo << 12)
                else:
                    add(sq | to << 6)
                    if r == start_rank and board[to + step] == 0:
                        add(sq | (to + step) << 6)
            for df in (-1, 1):
                if not 0 <= f + df < 8:
                    continue
                to = sq + step + df
                target = board[to]
                if target and (target & _BLACK) != side:
                    if to // 8 == last_rank:
                        for promo in (_Q, _R, _B, _N):
                            add(sq | to << 6 | promo << 12)
                    else:
                        add(sq | to << 6)
                elif to == ep:
                    add(sq | to << 6)
        elif kind == _N:
            for to in KNIGHT_TARGETS[sq]:
                target = board[to]
                if not target or (target & _BLACK) != side:
                    add(sq | to << 6)
        elif kind == _K:
            for to in KING_TARGETS[sq]:
                target = board[to]
                if not target or (target & _BLACK) != side:
                    add(sq | to << 6)
        else:
            lo = 4 if kind == _B else 0
            hi = 4 if kind == _R else 8
            sq_rays = RAYS[sq]
            for d in range(lo, hi):
                for to in sq_rays[d]:
                    target = board[to]
                    if target:
                        if (target & _BLACK) != side:
                            add(sq | to << 6)
                        break
                    add(sq | to << 6)
    # castling: king on its home square, rook on its corner, path empty and unattacked
    if white:
        if castling & 1 and board[4] == _K and board[7] == _R and not board[5] and not board[6]:
            if not attacked(board, 4, False) and not attacked(board, 5, False) and not attacked(board, 6, False):
                add(4 | 6 << 6)
        if castling & 2 and board[4] == _K and board[0] == _R and not board[1] and not board[2] and not board[3]:
            if not attacked(board, 4, False) and not attacked(board, 3, False) and not attacked(board, 2, False):
                add(4 | 2 << 6)
    else:
        bk, br = _K | _BLACK, _R | _BLACK
        if castling & 4 and board[60] == bk and board[63] == br and not board[61] and not board[62]:
            if not attacked(board, 60, True) and not attacked(board, 61, True) and not attacked(board, 62, True):
                add(60 | 62 << 6)
        if castling & 8 and board[60] == bk and board[56] == br and not board[57] and not board[58] and not board[59]:
            if not attacked(board, 60, True) and not attacked(board, 59, True) and not attacked(board, 58, True):
                add(60 | 58 << 6)
    return moves


def make_move(board, white, castling, ep, move):
    """Apply ``move`` to ``board`` in place.

    Returns ``(castling, ep, undo)``; pass ``undo`` to :func:`unmake_move`.
    """
    frm = move & 63
    to = (move >> 6) & 63
    promo = move >> 12
    pc = board[frm]
    captured = board[to]
    cap_sq = to
    rook_from = rook_to = -1
    kind = pc & 7
    new_ep = -1
    board[frm] = 0
    if kind == _P:
        if to == ep:
            cap_sq = to - 8 if white else to + 8
            captured = board[cap_sq]
            board[cap_sq] = 0
        elif abs(to - frm) == 16:
            new_ep = (frm + to) >> 1
        board[to] = (promo | (pc & _BLACK)) if promo else pc
    else:
        board[to] = pc
        if kind == _K and abs(to - frm) == 2:
            if to > frm:
                rook_from, rook_to = frm + 3, frm + 1
            else:
                rook_from, rook_to = frm - 4, frm - 1
            board[rook_to] = board[rook_from]
            board[rook_from] = 0
    castling &= CASTLE_MASK[frm] & CASTLE_MASK[to]
    return castling, new_ep, (frm, to, pc, captured, cap_sq, rook_from, rook_to)


def unmake_move(board, undo):
    frm, to, pc, captured, cap_sq, rook_from, rook_to = undo
    board[frm] = pc
    board[to] = 0
    board[cap_sq] = captured
    if rook_from >= 0:
        board[rook_from] = board[rook_to]
        board[rook_to] = 0


def _king_square(board, white):
    return board.index(_K if white else _K | _BLACK)


def in_check(board, white):
    """Whether the king of side ``white`` is attacked."""
    return attacked(board, _king_square(board, white), not white)


def legal_moves(board, white, castling, ep):
    """Legal moves for the side to move, in generation order."""
    board = list(board)
    legal = []
    king_sq = _king_square(board, white)
    for m in _pseudo_moves(board, white, castling, ep):
        frm = m & 63
        _, _, undo = make_move(board, white, castling, ep, m)
        ksq = (m >> 6) & 63 if frm == king_sq else king_sq
        if not attacked(board, ksq, not white):
            legal.append(m)
        unmake_move(board, undo)
    return legal


def _perft(board, white, castling, ep, depth):
    moves = legal_moves(board, white, castling, ep)
    if depth == 1:
        return len(moves)
    total = 0
    for m in moves:
        c2, ep2, undo = make_move(board, white, castling, ep, m)
        total += _perft(board, not white, c2, ep2, depth - 1)
        unmake_move(board, undo)
    return total


def perft(board, white, castling, ep, depth):
    """Leaf count of the legal-move tree at exactly ``depth`` plies."""
    if depth <= 0:
        return 1
    return _perft(list(board), white, castling, ep, depth)
