//! Node-level description of the lumped network and its DC operating point.
//!
//! Everything the integrator needs reduces to four element kinds: shunt
//! conductances to ground, Norton current injections, series R-L branches,
//! and node capacitors. Sources enter as their Norton equivalent
//! (`g = 1/R_s` plus `J = V/R_s`), so the nodal matrix stays symmetric
//! positive definite as long as something ties the network to ground.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::NetworkConfig;

/// Series R-L branch carrying a directed current `from -> to`.
#[derive(Debug, Clone, Copy)]
pub struct RlBranch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub l: f64,
}

/// Shunt capacitor at a node.
#[derive(Debug, Clone, Copy)]
pub struct Capacitor {
    pub node: usize,
    pub c: f64,
}

/// Assembled passive network with Norton sources.
#[derive(Debug, Clone, Default)]
pub struct Network {
    pub shunt_g: Vec<f64>,
    pub injection: Vec<f64>,
    pub rl: Vec<RlBranch>,
    pub caps: Vec<Capacitor>,
    /// Nodes where the shunt loads sit, with their base conductance;
    /// load-step events rescale these entries of `shunt_g`.
    pub load_shunts: Vec<(usize, f64)>,
    /// Terminal bus node per terminal.
    pub terminal_nodes: Vec<usize>,
    /// Index into `rl` of each terminal's limiting inductor.
    pub terminal_inductors: Vec<usize>,
    /// Line nodes along the path from the measuring terminal: `(km, node)`,
    /// one entry per section boundary of the measuring branch, then of each
    /// continuation branch beyond the junction.
    pub path_nodes: Vec<(f64, usize)>,
}

impl Network {
    pub fn n_nodes(&self) -> usize {
        self.shunt_g.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.shunt_g.push(0.0);
        self.injection.push(0.0);
        self.shunt_g.len() - 1
    }

    pub fn add_shunt(&mut self, node: usize, g: f64) {
        self.shunt_g[node] += g;
    }

    /// Ideal source `volts` behind `r_source`, as a Norton pair at `node`.
    pub fn add_source(&mut self, node: usize, volts: f64, r_source: f64) {
        let g = 1.0 / r_source;
        self.shunt_g[node] += g;
        self.injection[node] += volts * g;
    }

    pub fn add_rl(&mut self, from: usize, to: usize, r: f64, l: f64) -> usize {
        self.rl.push(RlBranch { from, to, r, l });
        self.rl.len() - 1
    }

    pub fn add_cap(&mut self, node: usize, c: f64) {
        self.caps.push(Capacitor { node, c });
    }

    /// Build the star network: per terminal a source node and a terminal
    /// bus joined by the limiting inductor, per branch a chain of
    /// pi-sections into the shared junction.
    pub fn three_terminal_star(config: &NetworkConfig, limiting_inductance: f64) -> Result<Self> {
        config.validate()?;
        let mut net = Network::default();

        let junction = net.add_node();
        let mut terminal_nodes = Vec::with_capacity(3);
        let mut terminal_inductors = Vec::with_capacity(3);
        let mut branch_line_nodes: Vec<Vec<usize>> = Vec::with_capacity(3);

        for (t, line) in config.branches.iter().enumerate() {
            let source_node = net.add_node();
            let terminal = net.add_node();
            net.add_source(source_node, config.nominal_voltage, config.source_resistance[t]);
            let ind = net.add_rl(source_node, terminal, 0.0, limiting_inductance);
            terminal_nodes.push(terminal);
            terminal_inductors.push(ind);

            // Chain of sections terminal -> junction. Node k sits k sections
            // from the terminal; boundary capacitance is c*len/2 per side.
            let sec_km = line.section_km();
            let r_sec = line.r_per_km * sec_km;
            let l_sec = line.l_per_km * sec_km;
            let c_half = line.c_per_km * sec_km * 0.5;

            let mut nodes = vec![terminal];
            for _ in 1..line.n_sections {
                nodes.push(net.add_node());
            }
            nodes.push(junction);
            for w in nodes.windows(2) {
                net.add_rl(w[0], w[1], r_sec, l_sec);
            }
            net.add_cap(terminal, c_half);
            for &n in &nodes[1..line.n_sections] {
                net.add_cap(n, 2.0 * c_half);
            }
            net.add_cap(junction, c_half);
            branch_line_nodes.push(nodes);
        }

        for (&t, &g) in config.load_terminals().iter().zip(&config.load_conductances) {
            let node = terminal_nodes[t];
            net.add_shunt(node, g);
            net.load_shunts.push((node, g));
        }

        // Path map: measuring branch from its terminal, then each other
        // branch walked junction -> terminal with offset distances.
        let m = config.measuring_terminal;
        let own = &config.branches[m];
        let mut path_nodes = Vec::new();
        for (k, &node) in branch_line_nodes[m].iter().enumerate() {
            path_nodes.push((own.section_km() * k as f64, node));
        }
        for &t in &config.load_terminals() {
            let line = &config.branches[t];
            for (k, &node) in branch_line_nodes[t].iter().rev().enumerate().skip(1) {
                path_nodes.push((own.length_km + line.section_km() * k as f64, node));
            }
        }

        net.terminal_nodes = terminal_nodes;
        net.terminal_inductors = terminal_inductors;
        net.path_nodes = path_nodes;
        Ok(net)
    }

    /// Line node nearest to `distance_km` along the measuring path,
    /// restricted to the measuring branch or the continuation onto
    /// `branch_index`.
    pub fn fault_node(
        &self,
        config: &NetworkConfig,
        branch_index: usize,
        distance_km: f64,
    ) -> Result<usize> {
        let m = config.measuring_terminal;
        let own_len = config.branches[m].length_km;
        let reach = if branch_index == m {
            own_len
        } else {
            own_len + config.branches[branch_index].length_km
        };
        if !(0.0..=reach).contains(&distance_km) {
            return Err(Error::InvalidParameter(format!(
                "fault at {distance_km} km is beyond the {reach} km path over branch {branch_index}"
            )));
        }
        // Nodes on the far side of the junction belong to a specific branch;
        // rebuild the eligible slice from the path map.
        let own_sections = config.branches[m].n_sections;
        let mut best: Option<(f64, usize)> = None;
        for (i, &(km, node)) in self.path_nodes.iter().enumerate() {
            // The trunk (measuring branch and junction) is on the path to
            // every fault; continuation entries are grouped per branch in
            // load_terminals order and only the faulted branch is eligible.
            if i > own_sections {
                let mut offset = own_sections + 1;
                let mut this_branch = usize::MAX;
                for &t in &config.load_terminals() {
                    let count = config.branches[t].n_sections;
                    if i < offset + count {
                        this_branch = t;
                        break;
                    }
                    offset += count;
                }
                if this_branch != branch_index {
                    continue;
                }
            }
            let err = (km - distance_km).abs();
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, node));
            }
        }
        best.map(|(_, node)| node)
            .ok_or_else(|| Error::InvalidParameter("empty fault path".into()))
    }

    /// DC operating point: inductors shorted, capacitors open.
    ///
    /// Zero-resistance branches are handled by merging their end nodes, so
    /// their steady currents come out exact rather than as 0/0 noise.
    pub fn dc_steady_state(&self) -> Result<DcSolution> {
        let n = self.n_nodes();
        let mut rep: Vec<usize> = (0..n).collect();
        fn find(rep: &mut Vec<usize>, i: usize) -> usize {
            if rep[i] != i {
                let root = find(rep, rep[i]);
                rep[i] = root;
            }
            rep[i]
        }
        for b in &self.rl {
            if b.r == 0.0 {
                let (a, c) = (find(&mut rep, b.from), find(&mut rep, b.to));
                if a != c {
                    rep[a] = c;
                }
            }
        }
        let mut compact = vec![usize::MAX; n];
        let mut m = 0;
        for i in 0..n {
            let r = find(&mut rep, i);
            if compact[r] == usize::MAX {
                compact[r] = m;
                m += 1;
            }
            compact[i] = compact[r];
        }

        let mut g = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for (i, &c) in compact.iter().enumerate() {
            g[(c, c)] += self.shunt_g[i];
            rhs[c] += self.injection[i];
        }
        for b in &self.rl {
            if b.r > 0.0 {
                let (a, c) = (compact[b.from], compact[b.to]);
                if a == c {
                    continue;
                }
                let gb = 1.0 / b.r;
                g[(a, a)] += gb;
                g[(c, c)] += gb;
                g[(a, c)] -= gb;
                g[(c, a)] -= gb;
            }
        }

        let lu = g.lu();
        let reduced = lu.solve(&rhs).ok_or_else(|| {
            Error::SingularSystem("no unique DC operating point (floating network?)".into())
        })?;
        if reduced.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(
                "DC solve produced non-finite voltages".into(),
            ));
        }
        let node_voltage: Vec<f64> = (0..n).map(|i| reduced[compact[i]]).collect();

        // Branch currents: Ohm's law where r > 0, KCL elimination for the
        // zero-resistance branches (resolved leaf-first; loops of them would
        // be indeterminate).
        let mut current = vec![0.0; self.rl.len()];
        let mut pending: Vec<usize> = Vec::new();
        let mut residual: Vec<f64> = (0..n)
            .map(|i| self.injection[i] - self.shunt_g[i] * node_voltage[i])
            .collect();
        for (k, b) in self.rl.iter().enumerate() {
            if b.r > 0.0 {
                current[k] = (node_voltage[b.from] - node_voltage[b.to]) / b.r;
                residual[b.from] -= current[k];
                residual[b.to] += current[k];
            } else {
                pending.push(k);
            }
        }
        let mut degree = vec![0usize; n];
        for &k in &pending {
            degree[self.rl[k].from] += 1;
            degree[self.rl[k].to] += 1;
        }
        let mut unresolved = pending.len();
        while unresolved > 0 {
            let before = unresolved;
            for &k in &pending {
                if current[k] != 0.0 || degree[self.rl[k].from].min(degree[self.rl[k].to]) == 0 {
                    continue;
                }
                let b = self.rl[k];
                let (leaf, sign) = if degree[b.from] == 1 {
                    (b.from, 1.0)
                } else if degree[b.to] == 1 {
                    (b.to, -1.0)
                } else {
                    continue;
                };
                // all other currents at `leaf` are known: branch takes the rest
                let i = sign * residual[leaf];
                current[k] = i;
                residual[b.from] -= i;
                residual[b.to] += i;
                degree[b.from] -= 1;
                degree[b.to] -= 1;
                unresolved -= 1;
            }
            if unresolved == before {
                return Err(Error::SingularSystem(
                    "zero-resistance loop: DC branch currents are indeterminate".into(),
                ));
            }
        }

        Ok(DcSolution {
            node_voltage,
            rl_current: current,
        })
    }
}

/// DC operating point of a [`Network`].
#[derive(Debug, Clone)]
pub struct DcSolution {
    pub node_voltage: Vec<f64>,
    pub rl_current: Vec<f64>,
}
