//! CSV trajectory dumps: `step, s0.., a0.., reward, terminated, truncated`.

use std::io::Write;

use super::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

pub fn write_csv<W: Write>(writer: W, steps: &[TrajectoryStep]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let state_dim = steps.first().map_or(0, |s| s.state.len());
    let action_dim = steps.first().map_or(0, |s| s.action.as_vec().len());
    let mut header = vec!["step".to_string()];
    header.extend((0..state_dim).map(|i| format!("s{i}")));
    header.extend((0..action_dim).map(|i| format!("a{i}")));
    header.extend(["reward", "terminated", "truncated"].map(String::from));
    w.write_record(&header)?;
    for (t, s) in steps.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(s.state.iter().map(|v| v.to_string()));
        row.extend(s.action.as_vec().iter().map(|v| v.to_string()));
        row.push(s.reward.to_string());
        row.push(u8::from(s.terminated).to_string());
        row.push(u8::from(s.truncated).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let steps = vec![
            TrajectoryStep {
                state: vec![0.5, -1.0],
                action: Action::Discrete(2),
                reward: -1.0,
                terminated: false,
                truncated: false,
            },
            TrajectoryStep {
                state: vec![0.25, 0.0],
                action: Action::Discrete(0),
                reward: -1.0,
                terminated: false,
                truncated: true,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &steps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,s0,s1,a0,reward,terminated,truncated\n0,0.5,-1,2,-1,0,0\n1,0.25,0,0,-1,0,1\n"
        );
    }
}
