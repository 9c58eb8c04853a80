//! Tic-tac-toe rules for the shared-controller game.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mark {
    X,
    O,
}

impl Mark {
    pub fn other(self) -> Mark {
        match self {
            Mark::X => Mark::O,
            Mark::O => Mark::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::X => "X",
            Mark::O => "O",
        }
    }

    pub fn parse(s: &str) -> Option<Mark> {
        match s {
            "X" => Some(Mark::X),
            "O" => Some(Mark::O),
            _ => None,
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameResult {
    None,
    Win(Mark),
    Draw,
}

impl GameResult {
    pub fn as_str(self) -> &'static str {
        match self {
            GameResult::None => "none",
            GameResult::Win(Mark::X) => "X",
            GameResult::Win(Mark::O) => "O",
            GameResult::Draw => "draw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("cell {0} is already taken")]
    CellOccupied(u8),
    #[error("{got} played out of turn ({expected} to move)")]
    OutOfTurn { expected: Mark, got: Mark },
    #[error("cell {0} is not on the board")]
    BadCell(u8),
    #[error("the game is already over")]
    GameOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Board {
    cells: [Option<Mark>; 9],
    next: Mark,
}

impl Default for Board {
    fn default() -> Self {
        Board {
            cells: [None; 9],
            next: Mark::X,
        }
    }
}

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

impl Board {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&self) -> Mark {
        self.next
    }

    /// Mark in cell 1..=9.
    pub fn cell(&self, cell: u8) -> Option<Mark> {
        self.cells.get(usize::from(cell).wrapping_sub(1)).copied().flatten()
    }

    pub fn empty_cells(&self) -> Vec<u8> {
        (1..=9).filter(|&c| self.cell(c).is_none()).collect()
    }
}

pub fn ttt_apply(board: &Board, cell: u8, mark: Mark) -> Result<Board, GameError> {
    if !(1..=9).contains(&cell) {
        return Err(GameError::BadCell(cell));
    }
    if ttt_winner(board) != GameResult::None {
        return Err(GameError::GameOver);
    }
    if mark != board.next {
        return Err(GameError::OutOfTurn {
            expected: board.next,
            got: mark,
        });
    }
    if board.cell(cell).is_some() {
        return Err(GameError::CellOccupied(cell));
    }
    let mut next = *board;
    next.cells[usize::from(cell - 1)] = Some(mark);
    next.next = mark.other();
    Ok(next)
}

pub fn ttt_winner(board: &Board) -> GameResult {
    for line in LINES {
        if let Some(m) = board.cells[line[0]] {
            if line.iter().all(|&i| board.cells[i] == Some(m)) {
                return GameResult::Win(m);
            }
        }
    }
    if board.cells.iter().all(Option::is_some) {
        GameResult::Draw
    } else {
        GameResult::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn play(moves: &[u8]) -> Board {
        let mut b = Board::new();
        for &c in moves {
            b = ttt_apply(&b, c, b.next()).unwrap();
        }
        b
    }

    #[test]
    fn first_move() {
        let b = ttt_apply(&Board::new(), 5, Mark::X).unwrap();
        assert_eq!(b.cell(5), Some(Mark::X));
        assert_eq!(b.next(), Mark::O);
    }

    #[test]
    fn errors() {
        let b = play(&[5]);
        assert_eq!(
            ttt_apply(&b, 1, Mark::X),
            Err(GameError::OutOfTurn {
                expected: Mark::O,
                got: Mark::X
            })
        );
        assert_eq!(ttt_apply(&b, 5, Mark::O), Err(GameError::CellOccupied(5)));
        assert_eq!(ttt_apply(&b, 0, Mark::O), Err(GameError::BadCell(0)));
        let won = play(&[1, 2, 5, 3, 9]);
        assert_eq!(ttt_apply(&won, 4, Mark::O), Err(GameError::GameOver));
    }

    #[test]
    fn winners() {
        assert_eq!(ttt_winner(&Board::new()), GameResult::None);
        assert_eq!(ttt_winner(&play(&[1, 2, 5, 3, 9])), GameResult::Win(Mark::X));
        assert_eq!(ttt_winner(&play(&[1, 5, 2, 3, 7, 4, 6, 9, 8])), GameResult::Draw);
    }

    /// Every reachable position keeps the mark counts balanced and never
    /// shows two winners.
    #[test]
    fn exhaustive_positions() {
        fn walk(b: Board, seen: &mut usize, draws: &mut usize) {
            *seen += 1;
            let xs = (1..=9).filter(|&c| b.cell(c) == Some(Mark::X)).count();
            let os = (1..=9).filter(|&c| b.cell(c) == Some(Mark::O)).count();
            assert!(xs == os || xs == os + 1);
            let winners = [Mark::X, Mark::O]
                .iter()
                .filter(|&&m| LINES.iter().any(|l| l.iter().all(|&i| b.cells[i] == Some(m))))
                .count();
            assert!(winners <= 1);
            match ttt_winner(&b) {
                GameResult::None => {
                    for c in b.empty_cells() {
                        walk(ttt_apply(&b, c, b.next()).unwrap(), seen, draws);
                    }
                }
                GameResult::Draw => *draws += 1,
                GameResult::Win(_) => {}
            }
        }
        let (mut seen, mut draws) = (0, 0);
        walk(Board::new(), &mut seen, &mut draws);
        assert_eq!(seen, 549_946);
        assert_eq!(draws, 46_080);
    }
}
