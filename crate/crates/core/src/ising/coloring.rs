/// Greedy proper coloring: vertices visited by descending degree (ties by
/// ascending index), each given the smallest color unused by its neighbors.
///
/// Returns the color of every vertex; colors are `0..k` with no gaps.
pub fn greedy_coloring(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| adjacency[b].len().cmp(&adjacency[a].len()).then(a.cmp(&b)));

    let mut color = vec![usize::MAX; n];
    let mut taken: Vec<bool> = Vec::new();
    for &v in &order {
        taken.clear();
        taken.resize(adjacency[v].len() + 1, false);
        for &u in &adjacency[v] {
            let c = color[u];
            if c < taken.len() {
                taken[c] = true;
            }
        }
        color[v] = taken.iter().position(|&t| !t).unwrap_or(taken.len());
    }
    color
}

pub fn is_proper(adjacency: &[Vec<usize>], color: &[usize]) -> bool {
    adjacency
        .iter()
        .enumerate()
        .all(|(v, nbrs)| nbrs.iter().all(|&u| color[u] != color[v]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
    }

    #[test]
    fn complete_graph_needs_n_colors() {
        let adj = complete(7);
        let c = greedy_coloring(&adj);
        assert!(is_proper(&adj, &c));
        assert_eq!(c.iter().max(), Some(&6));
    }

    #[test]
    fn path_is_two_colorable() {
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let c = greedy_coloring(&adj);
        assert!(is_proper(&adj, &c));
        assert_eq!(*c.iter().max().unwrap(), 1);
    }

    #[test]
    fn isolated_vertices_share_color_zero() {
        let adj = vec![vec![]; 4];
        assert_eq!(greedy_coloring(&adj), vec![0; 4]);
    }
}
