# Generated by Django 5.2.6 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SweepRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(db_index=True, max_length=8)),
                ('source', models.CharField(blank=True, max_length=255)),
                ('status', models.CharField(choices=[('RUNNING', 'Running'), ('DONE', 'Done'), ('FAILED', 'Failed')], default='RUNNING', max_length=10)),
                ('seed', models.IntegerField(default=0)),
                ('models_run', models.JSONField(blank=True, default=list)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('metrics', models.JSONField(blank=True, default=list)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
        ),
        migrations.CreateModel(
            name='RunOutcome',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('model', models.CharField(db_index=True, max_length=10)),
                ('cell', models.PositiveIntegerField()),
                ('speeds', models.JSONField(default=list)),
                ('types', models.JSONField(default=list)),
                ('actions', models.JSONField(blank=True, default=list)),
                ('success', models.BooleanField(default=False)),
                ('crash', models.BooleanField(default=False)),
                ('stuck', models.BooleanField(default=False)),
                ('min_gap', models.FloatField(blank=True, help_text='Smallest pairwise gap in metres', null=True)),
                ('sweep', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='outcomes', to='harness.sweeprun')),
            ],
            options={
                'ordering': ['sweep', 'model', 'cell'],
                'constraints': [models.UniqueConstraint(fields=('sweep', 'model', 'cell'), name='unique_outcome_per_cell')],
            },
        ),
    ]
